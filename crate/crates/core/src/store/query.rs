use std::cmp::Ordering;

use serde::Serialize;
use serde_json::Value;

use super::record::{Kind, Record};
use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
}

#[derive(Debug, Clone)]
struct Predicate {
    field: String,
    op: Op,
    value: Value,
}

/// Field-equality and range filters over top-level body fields, with an
/// optional sort (ties broken by id) and offset/limit paging.
#[derive(Debug, Clone, Default)]
pub struct Query {
    predicates: Vec<Predicate>,
    sort: Option<(String, Order)>,
    offset: usize,
    limit: Option<usize>,
}

impl Query {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(mut self, field: &str, op: Op, value: impl Serialize) -> Self {
        self.predicates.push(Predicate {
            field: field.to_owned(),
            op,
            value: serde_json::to_value(value).unwrap_or(Value::Null),
        });
        self
    }

    pub fn eq(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Eq, value)
    }

    pub fn ne(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Ne, value)
    }

    pub fn gt(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Gt, value)
    }

    pub fn ge(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Ge, value)
    }

    pub fn lt(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Lt, value)
    }

    pub fn le(self, field: &str, value: impl Serialize) -> Self {
        self.push(field, Op::Le, value)
    }

    pub fn sort(mut self, field: &str, order: Order) -> Self {
        self.sort = Some((field.to_owned(), order));
        self
    }

    pub fn offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    pub fn limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    /// One-based page of `per_page` items.
    pub fn page(self, page: usize, per_page: usize) -> Self {
        self.offset(page.saturating_sub(1) * per_page).limit(per_page)
    }

    pub(crate) fn validate(&self, kind: Kind) -> Result<(), StoreError> {
        let fields = kind.fields();
        let named = self
            .predicates
            .iter()
            .map(|p| p.field.as_str())
            .chain(self.sort.iter().map(|(f, _)| f.as_str()));
        for field in named {
            if !fields.contains(&field) {
                return Err(StoreError::UnknownField {
                    kind,
                    field: field.to_owned(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn matches(&self, record: &Record) -> bool {
        self.predicates.iter().all(|p| {
            let actual = record.body.get(&p.field).unwrap_or(&Value::Null);
            match p.op {
                Op::Eq => values_eq(actual, &p.value),
                Op::Ne => !values_eq(actual, &p.value),
                op => match compare(actual, &p.value) {
                    Some(ord) => match op {
                        Op::Gt => ord == Ordering::Greater,
                        Op::Ge => ord != Ordering::Less,
                        Op::Lt => ord == Ordering::Less,
                        Op::Le => ord != Ordering::Greater,
                        Op::Eq | Op::Ne => unreachable!(),
                    },
                    None => false,
                },
            }
        })
    }

    pub(crate) fn arrange<'a>(&self, mut rows: Vec<&'a Record>) -> Vec<&'a Record> {
        if let Some((field, order)) = &self.sort {
            rows.sort_by(|a, b| {
                let va = a.body.get(field).unwrap_or(&Value::Null);
                let vb = b.body.get(field).unwrap_or(&Value::Null);
                let ord = total_compare(va, vb).then_with(|| a.id.cmp(&b.id));
                if *order == Order::Desc { ord.reverse() } else { ord }
            });
        }
        let take = self.limit.unwrap_or(usize::MAX);
        rows.into_iter().skip(self.offset).take(take).collect()
    }
}

fn values_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        _ => a == b,
    }
}

fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64()?.partial_cmp(&y.as_f64()?),
        (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Sort order across mixed types: null < bool < number < string < other.
fn total_compare(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Number(_) => 2,
            Value::String(_) => 3,
            Value::Array(_) => 4,
            Value::Object(_) => 5,
        }
    }
    compare(a, b).unwrap_or_else(|| rank(a).cmp(&rank(b)))
}

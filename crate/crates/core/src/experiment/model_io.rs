//! Plain-text model files.
//!
//! ```text
//! mfreg-model 1
//! dims <M> <N> <k>
//! framework <name>
//! beta <β>                          (global_scalar only)
//! matrix <name> <rows> <cols>       followed by <rows> lines of <cols> numbers
//! ```
//!
//! Matrices appear in the order `users`, `items`, then `user_coefficients`
//! and `item_coefficients` (one column each) for `per_vector_scalar`, or
//! `user_reg` and `item_reg` for `vector_dot`. Numbers are written in
//! scientific notation with enough digits to round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{FactorModel, FrameworkKind, Regularization};
use crate::scalar::Scalar;

const MAGIC: &str = "mfreg-model 1";

fn num<T: Scalar>(x: T) -> String {
    format!("{:.*e}", T::ROUND_TRIP_PRECISION, x)
}

fn push_matrix<T: Scalar>(out: &mut String, name: &str, m: &Matrix<T>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.rows(), m.cols());
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|&x| num(x)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn model_to_string<T: Scalar>(model: &FactorModel<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dims {} {} {}", model.num_users(), model.num_items(), model.k());
    let _ = writeln!(out, "framework {}", model.kind());
    if let Regularization::GlobalScalar { beta } = model.framework() {
        let _ = writeln!(out, "beta {}", num(*beta));
    }
    push_matrix(&mut out, "users", model.users());
    push_matrix(&mut out, "items", model.items());
    match model.framework() {
        Regularization::PerVectorScalar { user, item } => {
            push_matrix(&mut out, "user_coefficients", &Matrix::from_vec(user.len(), 1, user.clone()));
            push_matrix(&mut out, "item_coefficients", &Matrix::from_vec(item.len(), 1, item.clone()));
        }
        Regularization::VectorDot => {
            push_matrix(&mut out, "user_reg", model.user_reg().expect("vector_dot"));
            push_matrix(&mut out, "item_reg", model.item_reg().expect("vector_dot"));
        }
        _ => {}
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
                None => return Err(Error::Config("model file ends early".into())),
            }
        }
    }

    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::Config(format!("model line {n}: expected `{tag}`")));
        }
        Ok((n, parts.collect()))
    }

    fn matrix<T: Scalar>(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix<T>> {
        let (n, head) = self.tagged("matrix")?;
        let dims: Vec<usize> = head.iter().skip(1).filter_map(|s| s.parse().ok()).collect();
        if head.first() != Some(&name) || dims != [rows, cols] {
            return Err(Error::Config(format!(
                "model line {n}: expected `matrix {name} {rows} {cols}`"
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = self.next()?;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(parse_num::<T>(n, tok)?);
            }
            if data.len() - before != cols {
                return Err(Error::Config(format!("model line {n}: expected {cols} numbers")));
            }
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }
}

fn parse_num<T: Scalar>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Config(format!("model line {line}: bad number `{tok}`")))
}

pub fn model_from_str<T: Scalar>(text: &str) -> Result<FactorModel<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(Error::Config(format!("not a model file (expected `{MAGIC}`)")));
    }
    let (n, dims) = lines.tagged("dims")?;
    let dims: Vec<usize> = dims.iter().filter_map(|s| s.parse().ok()).collect();
    let [m, nn, k] = dims[..] else {
        return Err(Error::Config(format!("model line {n}: expected `dims M N k`")));
    };
    let (n, fw) = lines.tagged("framework")?;
    let kind: FrameworkKind = fw
        .first()
        .ok_or_else(|| Error::Config(format!("model line {n}: missing framework")))?
        .parse()?;
    let beta = if kind == FrameworkKind::GlobalScalar {
        let (n, v) = lines.tagged("beta")?;
        Some(parse_num::<T>(n, v.first().copied().unwrap_or(""))?)
    } else {
        None
    };
    let users = lines.matrix("users", m, k)?;
    let items = lines.matrix("items", nn, k)?;
    match kind {
        FrameworkKind::None => FactorModel::new(users, items, Regularization::None),
        FrameworkKind::GlobalScalar => FactorModel::new(
            users,
            items,
            Regularization::GlobalScalar {
                beta: beta.expect("read above"),
            },
        ),
        FrameworkKind::PerVectorScalar => {
            let user = lines.matrix::<T>("user_coefficients", m, 1)?;
            let item = lines.matrix::<T>("item_coefficients", nn, 1)?;
            FactorModel::new(
                users,
                items,
                Regularization::PerVectorScalar {
                    user: user.as_slice().to_vec(),
                    item: item.as_slice().to_vec(),
                },
            )
        }
        FrameworkKind::VectorDot => {
            let b = lines.matrix("user_reg", m, k)?;
            let g = lines.matrix("item_reg", nn, k)?;
            FactorModel::vector_dot(users, items, b, g)
        }
    }
}

pub fn save_model<T: Scalar>(model: &FactorModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<FactorModel<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

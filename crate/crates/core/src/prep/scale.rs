use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};
use crate::prep::expand;

/// Standardizes every suffixed copy of each base variable with the mean and SD pooled over
/// all copies, so twin-pair mean differences survive.
pub fn scale_wide_twin(data: &ColumnTable, bases: &[String], suffixes: &[String]) -> Result<ColumnTable> {
    let mut out = data.clone();
    for b in bases {
        let cols = expand(b, Some(suffixes));
        let mut xs = Vec::new();
        for c in &cols {
            match data.get(c) {
                None => return Err(Error::Data(format!("no column named `{c}`"))),
                Some(Column::Continuous(v)) => xs.extend(v.iter().flatten().copied()),
                Some(other) => {
                    return Err(Error::Data(format!("cannot scale {} column `{c}`", other.kind())))
                }
            }
        }
        let (m, v) = crate::builders::mean_var(&xs.iter().map(|&x| Some(x)).collect::<Vec<_>>())
            .ok_or_else(|| Error::Data(format!("`{b}` has fewer than two observed values")))?;
        if !(v > 0.0) {
            return Err(Error::Data(format!("`{b}` has zero pooled variance")));
        }
        let sd = v.sqrt();
        for c in &cols {
            for x in out.continuous_mut(c)?.iter_mut().flatten() {
                *x = (*x - m) / sd;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_not_per_column() {
        let mut d = ColumnTable::new();
        d.insert_continuous("x_T1", vec![Some(0.0), Some(2.0)]).unwrap();
        d.insert_continuous("x_T2", vec![Some(4.0), None]).unwrap();
        let s = ["_T1".to_string(), "_T2".to_string()];
        let out = scale_wide_twin(&d, &["x".into()], &s).unwrap();
        // pooled mean 2, sd 2
        assert_eq!(out.continuous("x_T1").unwrap(), &[Some(-1.0), Some(0.0)]);
        assert_eq!(out.continuous("x_T2").unwrap(), &[Some(1.0), None]);
        let mut c = ColumnTable::new();
        c.insert_continuous("k_T1", vec![Some(3.0); 3]).unwrap();
        c.insert_continuous("k_T2", vec![Some(3.0); 3]).unwrap();
        assert!(scale_wide_twin(&c, &["k".into()], &s).is_err());
    }
}

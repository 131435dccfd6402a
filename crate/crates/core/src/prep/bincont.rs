use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};

pub const BIN_LEVELS: [&str; 2] = ["<low>", "<high>"];

/// Appends `<var>bin` / `<var>cont` columns for each source column (`<var><suffix>` when suffixes
/// are given; the suffix goes after the tag, e.g. `X1bin_T1`). Below `censp` the bin column is
/// `<low>` and cont is missing; at or above it bin is missing and cont carries the value.
/// `<high>` is declared but never observed. Existing bin/cont columns are replaced.
pub fn make_bin_cont_pair(
    data: &ColumnTable,
    vars: &[String],
    censp: f64,
    suffixes: Option<&[String]>,
) -> Result<ColumnTable> {
    if !censp.is_finite() {
        return Err(Error::Data(format!("censoring point {censp} is not finite")));
    }
    let sfx: Vec<String> = match suffixes {
        Some(s) if !s.is_empty() => s.to_vec(),
        _ => vec![String::new()],
    };
    let mut out = data.clone();
    for v in vars {
        for s in &sfx {
            let src = format!("{v}{s}");
            let x = data.continuous(&src).map_err(|_| match data.get(&src) {
                None => Error::Data(format!("no column named `{src}`")),
                Some(c) => Error::Data(format!("`{src}` is {}, not continuous", c.kind())),
            })?;
            let codes = x.iter().map(|o| o.filter(|&x| x < censp).map(|_| 0)).collect();
            let cont = x.iter().map(|o| o.filter(|&x| x >= censp)).collect();
            out.insert(
                &format!("{v}bin{s}"),
                Column::Ordinal {
                    levels: BIN_LEVELS.iter().map(|l| l.to_string()).collect(),
                    codes,
                },
            )?;
            out.insert_continuous(&format!("{v}cont{s}"), cont)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_split_at_lod() {
        let mut d = ColumnTable::new();
        d.insert_continuous("mpg", vec![Some(0.0005), Some(5.2), None, Some(0.001)]).unwrap();
        let out = make_bin_cont_pair(&d, &["mpg".into()], 0.001, None).unwrap();
        assert_eq!(out.nrows(), 4);
        assert!(out.has("mpg"));
        assert_eq!(out.continuous("mpgcont").unwrap(), &[None, Some(5.2), None, Some(0.001)]);
        match out.get("mpgbin").unwrap() {
            Column::Ordinal { codes, .. } => assert_eq!(codes, &[Some(0), None, None, None]),
            _ => panic!(),
        }
    }

    #[test]
    fn suffix_goes_after_tag() {
        let mut d = ColumnTable::new();
        d.insert_continuous("X1_T1", vec![Some(1.0)]).unwrap();
        d.insert_continuous("X1_T2", vec![Some(-1.0)]).unwrap();
        let s = ["_T1".to_string(), "_T2".to_string()];
        let out = make_bin_cont_pair(&d, &["X1".into()], 0.0, Some(&s)).unwrap();
        assert!(out.has("X1bin_T1") && out.has("X1cont_T2"));
        assert!(make_bin_cont_pair(&d, &["X2".into()], 0.0, Some(&s)).is_err());
    }
}

//! Joint model for a censored measure split into `<v>bin` (ordinal) and `<v>cont` columns.

use crate::builders::{mean_var, ordinal_levels, require_columns};
use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::model::{Group, GroupedModel};
use crate::ram::{PathSpec, RamModel};
use crate::thresholds::ThresholdColumn;

/// One latent `L_<var>` with free mean `mean_<var>` and variance `var_<var>` loads 1 on both
/// `<var>bin` and `<var>cont`, neither of which has a residual. The single threshold of the bin
/// column is fixed at `censp`, so rows below the LOD contribute Φ((censp − μ)/σ).
pub fn icu_model(name: &str, var: &str, censp: f64, data: ColumnTable) -> Result<GroupedModel> {
    let bin = format!("{var}bin");
    let cont = format!("{var}cont");
    require_columns(&data, name, &[bin.clone(), cont.clone()])?;
    let levels = ordinal_levels(&data, &bin)
        .ok_or_else(|| Error::Data(format!("`{bin}` must be an ordinal column")))?;
    if levels.len() != 2 {
        return Err(Error::Data(format!("`{bin}` must have exactly two levels")));
    }
    let cv = data.continuous(&cont)?;
    let (m0, v0) = match mean_var(cv) {
        Some((m, v)) => (m, v.max(1e-2)),
        None => (censp, 1.0),
    };
    let latent = format!("L_{var}");
    let paths = [
        PathSpec::one_headed(&latent, &bin).fixed(1.0),
        PathSpec::one_headed(&latent, &cont).fixed(1.0),
        PathSpec::variance(&latent).label(&format!("var_{var}")).start(v0),
        PathSpec::mean(&latent).label(&format!("mean_{var}")).start(m0),
    ];
    let ram = RamModel::from_paths(name, &[bin.clone(), cont], &[latent], &paths)?;
    let mut group = Group::new(name, ram);
    group
        .thresholds
        .insert(ThresholdColumn::fixed(&bin, &levels, &[censp])?)?;
    let mut model = GroupedModel::new(name);
    model.push(group.with_data(data))?;
    model.set_bound(&format!("var_{var}"), 1e-6, f64::INFINITY);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use crate::fiml::FimlObjective;

    #[test]
    fn censored_and_observed_rows() {
        let mut d = ColumnTable::new();
        d.insert(
            "xbin",
            Column::Ordinal {
                levels: vec!["<low>".into(), "<high>".into()],
                codes: vec![Some(0), None],
            },
        )
        .unwrap();
        d.insert_continuous("xcont", vec![None, Some(2.0)]).unwrap();
        let m = icu_model("icu", "x", 0.5, d).unwrap();
        let labels: Vec<String> = vec!["var_x".into(), "mean_x".into()];
        let obj = FimlObjective::new(&m, &labels).unwrap();
        let (mu, var) = (1.0, 1.44);
        let got = obj.evaluate(&[var, mu]).neg2ll;
        let z = (0.5 - mu) / var.sqrt();
        let p = statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2) / 2.0;
        let dens = (2.0 * std::f64::consts::PI * var).ln() + (2.0 - mu) * (2.0 - mu) / var;
        assert!((got - (-2.0 * p.ln() + dens)).abs() < 1e-10);
    }
}

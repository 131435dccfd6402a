//! Cross-lagged panel models: the classic lag-1 CLPM and the random-intercept variant.

use std::str::FromStr;

use crate::builders::{mean_var, require_columns};
use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::model::{Group, GroupedModel};
use crate::ram::{PathSpec, RamModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClpmVariant {
    Clpm,
    RiClpm,
}

impl FromStr for ClpmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clpm" | "heise1970" => Ok(Self::Clpm),
            "riclpm" | "ri-clpm" | "hamaker2015" => Ok(Self::RiClpm),
            _ => Err(Error::Model(format!("unknown CLPM variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClpmSpec {
    pub name: String,
    pub waves: usize,
    pub variant: ClpmVariant,
    pub x: String,
    pub y: String,
    /// One innovation variance/covariance set shared by waves 2..
    pub equal_innovations: bool,
}

impl ClpmSpec {
    pub fn new(name: &str, waves: usize, variant: ClpmVariant, x: &str, y: &str) -> Self {
        Self {
            name: name.into(),
            waves,
            variant,
            x: x.into(),
            y: y.into(),
            equal_innovations: false,
        }
    }

    /// Observed columns: x1, y1, x2, y2, ...
    pub fn columns(&self) -> Vec<String> {
        (1..=self.waves)
            .flat_map(|t| [format!("{}{t}", self.x), format!("{}{t}", self.y)])
            .collect()
    }

    fn check(&self) -> Result<()> {
        let min = match self.variant {
            ClpmVariant::Clpm => 2,
            ClpmVariant::RiClpm => 3,
        };
        if self.waves < min {
            return Err(Error::Model(format!(
                "{:?} needs at least {min} waves, got {}",
                self.variant, self.waves
            )));
        }
        if self.x == self.y {
            return Err(Error::Model("x and y base names must differ".into()));
        }
        Ok(())
    }

    pub fn paths(&self) -> Result<Vec<PathSpec>> {
        self.check()?;
        let w = self.waves;
        let obs = |b: &str, t: usize| format!("{b}{t}");
        // the variables carrying the dynamics
        let (dx, dy): (Vec<String>, Vec<String>) = match self.variant {
            ClpmVariant::Clpm => ((1..=w).map(|t| obs(&self.x, t)).collect(), (1..=w).map(|t| obs(&self.y, t)).collect()),
            ClpmVariant::RiClpm => ((1..=w).map(|t| format!("wx{t}")).collect(), (1..=w).map(|t| format!("wy{t}")).collect()),
        };
        let mut p = vec![
            PathSpec::variance(&dx[0]).label("var_x1").start(1.0),
            PathSpec::variance(&dy[0]).label("var_y1").start(1.0),
            PathSpec::two_headed(&dx[0], &dy[0]).label("cov_xy1").start(0.0),
        ];
        for t in 1..w {
            let lag = format!("{t}{}", t + 1);
            p.push(PathSpec::one_headed(&dx[t - 1], &dx[t]).label(&format!("x2x_{lag}")).start(0.3));
            p.push(PathSpec::one_headed(&dy[t - 1], &dy[t]).label(&format!("y2y_{lag}")).start(0.3));
            p.push(PathSpec::one_headed(&dx[t - 1], &dy[t]).label(&format!("x2y_{lag}")).start(0.0));
            p.push(PathSpec::one_headed(&dy[t - 1], &dx[t]).label(&format!("y2x_{lag}")).start(0.0));
            let k = if self.equal_innovations { String::new() } else { (t + 1).to_string() };
            p.push(PathSpec::variance(&dx[t]).label(&format!("res_x{k}")).start(1.0));
            p.push(PathSpec::variance(&dy[t]).label(&format!("res_y{k}")).start(1.0));
            p.push(PathSpec::two_headed(&dx[t], &dy[t]).label(&format!("res_xy{k}")).start(0.0));
        }
        if self.variant == ClpmVariant::RiClpm {
            for t in 1..=w {
                for (ri, within, base) in [("RIx", &dx, &self.x), ("RIy", &dy, &self.y)] {
                    p.push(PathSpec::one_headed(ri, &obs(base, t)).fixed(1.0));
                    p.push(PathSpec::one_headed(&within[t - 1], &obs(base, t)).fixed(1.0));
                }
            }
            p.push(PathSpec::variance("RIx").label("var_RIx").start(0.5));
            p.push(PathSpec::variance("RIy").label("var_RIy").start(0.5));
            p.push(PathSpec::two_headed("RIx", "RIy").label("cov_RI").start(0.0));
        }
        for t in 1..=w {
            for base in [&self.x, &self.y] {
                let v = obs(base, t);
                p.push(PathSpec::mean(&v).label(&format!("mean_{v}")).start(0.0));
            }
        }
        Ok(p)
    }

    /// The model without data.
    pub fn model(&self) -> Result<GroupedModel> {
        let paths = self.paths()?;
        let latents: Vec<String> = match self.variant {
            ClpmVariant::Clpm => Vec::new(),
            ClpmVariant::RiClpm => ["RIx", "RIy"]
                .iter()
                .map(|s| s.to_string())
                .chain((1..=self.waves).flat_map(|t| [format!("wx{t}"), format!("wy{t}")]))
                .collect(),
        };
        let ram = RamModel::from_paths(&self.name, &self.columns(), &latents, &paths)?;
        let mut model = GroupedModel::new(&self.name);
        model.push(Group::new(&self.name, ram))?;
        Ok(model)
    }
}

/// Builds the panel model over columns `<x>1..<x>W`, `<y>1..<y>W` and binds `data`.
/// Starting means and variances come from the data.
pub fn build_clpm(spec: &ClpmSpec, data: ColumnTable) -> Result<GroupedModel> {
    let mut model = spec.model()?;
    let cols = spec.columns();
    require_columns(&data, &spec.name, &cols)?;
    let ram = &mut model.groups[0].model;
    for (base, var1) in [(&spec.x, "var_x1"), (&spec.y, "var_y1")] {
        for t in 1..=spec.waves {
            let c = format!("{base}{t}");
            let xs = data
                .continuous(&c)
                .map_err(|_| Error::Data(format!("column `{c}` must be continuous")))?;
            if let Some((m, v)) = mean_var(xs) {
                ram.set_parameter(&format!("mean_{c}"), m);
                if t == 1 && v > 0.0 {
                    ram.set_parameter(var1, v);
                }
            }
        }
    }
    model.groups[0].data = Some(data);
    Ok(model)
}

//! JSON run configuration: germ specs, the generator pair and analysis
//! settings. Complex numbers are `[re, im]` arrays.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed_points::FixedPointOptions;
use crate::germ::{tangency_order, AddedTerm, DiskDomain, Germ, GermError, GermExpr};
use crate::orbit::ExplorerBudget;
use crate::perturbation::PerturbationOptions;
use crate::pseudogroup::{Closure, Generator, GeneratorPair};
use crate::word::Orders;

/// Roots of unity are recognized up to this order.
pub const MAX_ROOT_OF_UNITY_ORDER: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<GermError> for ConfigError {
    fn from(e: GermError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GermSpec {
    Identity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    Linear {
        lambda: C,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    Mobius {
        a: C,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    PolyAdditive {
        base: Box<GermSpec>,
        term: AddedTerm,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    Compose {
        outer: Box<GermSpec>,
        inner: Box<GermSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    Inverse {
        of: Box<GermSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
}

impl GermSpec {
    pub fn build(&self) -> Result<Germ, GermError> {
        let (g, r) = match self {
            GermSpec::Identity { domain_radius } => (Germ::identity(), domain_radius),
            GermSpec::Linear { lambda, domain_radius } => (Germ::linear(*lambda)?, domain_radius),
            GermSpec::Mobius { a, domain_radius } => (Germ::mobius(*a)?, domain_radius),
            GermSpec::PolyAdditive { base, term, domain_radius } => {
                (Germ::poly_additive(base.build()?, term.clone(), *domain_radius)?, &None)
            }
            GermSpec::Compose { outer, inner, domain_radius } => {
                (Germ::compose(&outer.build()?, &inner.build()?)?, domain_radius)
            }
            GermSpec::Inverse { of, domain_radius } => (of.build()?.inverse()?, domain_radius),
        };
        match r {
            Some(r) if *r > 0.0 => Ok(g.with_radius(*r)),
            Some(r) => Err(GermError::Invalid(format!("domain radius {r} must be positive"))),
            None => Ok(g),
        }
    }

    /// Spec reproducing `g`, radius included whenever it is finite.
    pub fn from_germ(g: &Germ) -> GermSpec {
        let r = g.radius().is_finite().then_some(g.radius());
        match g.expr() {
            GermExpr::Linear(l) => GermSpec::Linear { lambda: *l, domain_radius: r },
            GermExpr::Mobius(a) => GermSpec::Mobius { a: *a, domain_radius: r },
            GermExpr::PolyAdditive { base, term } => GermSpec::PolyAdditive {
                base: Box::new(GermSpec::from_germ(base)),
                term: term.clone(),
                domain_radius: r,
            },
            GermExpr::Compose { outer, inner } => GermSpec::Compose {
                outer: Box::new(GermSpec::from_germ(outer)),
                inner: Box::new(GermSpec::from_germ(inner)),
                domain_radius: r,
            },
            GermExpr::Inverse { forward } => {
                GermSpec::Inverse { of: Box::new(GermSpec::from_germ(forward)), domain_radius: r }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub core: GermSpec,
    /// Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugator: Option<GermSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub center: C,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Common fixed point to split; all of them in the region when absent.
    #[serde(default)]
    pub q: Option<C>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.05
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { q: None, delta: default_delta() }
    }
}

fn default_resolution() -> usize {
    101
}

fn default_jet_order() -> usize {
    crate::jet::DEFAULT_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub f: GeneratorSpec,
    pub g: GeneratorSpec,
    /// Radius of the base disc `D`.
    pub radius: f64,
    #[serde(default)]
    pub orders: Orders,
    /// Tangency class of the conjugators and their perturbations.
    #[serde(default)]
    pub alpha: u32,
    #[serde(default)]
    pub seed: u64,
    /// Membership slack `ε` for analyses on the extended domain; 0 means the
    /// open disc.
    #[serde(default)]
    pub extension: f64,
    /// Analysis region; `D` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub fixed_points: FixedPointOptions,
    #[serde(default)]
    pub perturbation: PerturbationOptions,
    #[serde(default)]
    pub explorer: ExplorerBudget,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_resolution")]
    pub domain_resolution: usize,
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
}

/// Multiplier at 0 is hyperbolic, a root of unity, or rejected as
/// possibly Cremer.
pub fn check_multiplier(lambda: C, tol_hyp: f64) -> Result<(), String> {
    if (lambda.norm() - 1.0).abs() > tol_hyp {
        return Ok(());
    }
    let mut p = C::new(1.0, 0.0);
    for n in 1..=MAX_ROOT_OF_UNITY_ORDER {
        p *= lambda;
        if (p - 1.0).norm() < 1e-9 * n as f64 {
            return Ok(());
        }
    }
    Err(format!(
        "multiplier {lambda} has modulus 1 but is not a root of unity of order ≤ {MAX_ROOT_OF_UNITY_ORDER}; \
         Cremer-type generators are excluded"
    ))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn orders(&self) -> Result<Orders, ConfigError> {
        Orders::new(self.orders.r, self.orders.s).map_err(ConfigError::Invalid)
    }

    /// Checks everything `build_pair` checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build_pair().map(|_| ())
    }

    pub fn build_pair(&self) -> Result<GeneratorPair, ConfigError> {
        if !(self.radius > 0.0) {
            return Err(ConfigError::Invalid(format!("radius {} must be positive", self.radius)));
        }
        if !(self.extension >= 0.0) {
            return Err(ConfigError::Invalid(format!("extension {} must be non-negative", self.extension)));
        }
        if self.domain_resolution < 8 {
            return Err(ConfigError::Invalid("domain_resolution must be at least 8".into()));
        }
        if let Some(r) = self.region {
            if !(r.radius > 0.0) {
                return Err(ConfigError::Invalid(format!("region radius {} must be positive", r.radius)));
            }
        }
        let orders = self.orders()?;
        let gen = |name: &str, spec: &GeneratorSpec| -> Result<Generator, ConfigError> {
            let core = spec.core.build().map_err(|e| ConfigError::Invalid(format!("{name}.core: {e}")))?;
            check_multiplier(core.multiplier(), self.fixed_points.tol_hyp)
                .map_err(|e| ConfigError::Invalid(format!("{name}.core: {e}")))?;
            let h = match &spec.conjugator {
                Some(s) => s.build().map_err(|e| ConfigError::Invalid(format!("{name}.conjugator: {e}")))?,
                None => Germ::identity(),
            };
            if !h.is_identity() && tangency_order(&h, self.jet_order) < self.alpha {
                return Err(ConfigError::Invalid(format!(
                    "{name}.conjugator is not tangent to the identity to order {}",
                    self.alpha
                )));
            }
            Generator::new(core, h).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))
        };
        let f = gen("f", &self.f)?;
        let g = gen("g", &self.g)?;
        GeneratorPair::new(f, g, self.radius, orders).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn region(&self) -> DiskDomain {
        match self.region {
            Some(r) => DiskDomain::new(r.center, r.radius, false),
            None => DiskDomain::centered(self.radius),
        }
    }

    pub fn closure(&self) -> Closure {
        if self.extension > 0.0 {
            Closure::Extended(self.extension)
        } else {
            Closure::Open
        }
    }

    pub fn perturbation_options(&self) -> PerturbationOptions {
        PerturbationOptions { alpha: self.alpha, fixed_points: self.fixed_points, ..self.perturbation }
    }

    /// Same config with the pair's current conjugators written back.
    pub fn with_pair(&self, pair: &GeneratorPair) -> RunConfig {
        let mut next = self.clone();
        next.f.conjugator = Some(GermSpec::from_germ(pair.f().conjugator()));
        next.g.conjugator = Some(GermSpec::from_germ(pair.g().conjugator()));
        next
    }
}

//! Batch experiment driver: configuration, dispatch, reports and the
//! composition search over triples `X1 ⊂ X2 ⊂ X3`.
//!
//! A report is byte-stable for a fixed configuration; wall-clock timings live
//! in a separate `timing.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::enlargements::{
    contains_image, example_experiment, l1_sum_construction, sqrt2_bound_check, Enlargement, MinimalRealizer,
    Sqrt2Report,
};
use crate::error::{Error, Result};
use crate::fdd::{
    blocking_step, build_interlaced, commuting_construction, convergence_profile, perturb_decomposition,
    random_perturbations, strong_limit_simulation, Decomposition, InterlacedSystem, OuterChoice,
};
use crate::instances;
use crate::io::{matrix_from_flat, matrix_to_flat, read_json, ChainSpec, DecompositionSpec, SpaceSpec, SubspaceSpec};
use crate::linalg::{self, Matrix};
use crate::minmax::{minimize_max_norm, MinMaxOptions};
use crate::minproj::{lambda_absolute_approx, minimal_projection, EmbedScheme, MinProjOptions, ProjectionFamily};
use crate::projections::{composition_table, factor_through, minimize_chain_blowup, BlowupOptions, Chain, Projection};
use crate::spaces::{restricted_norm, NormOptions, NormedSpace};
use crate::subspace::Subspace;
use crate::tol::{self, Tolerances};

pub const SCHEMA: u32 = 1;

/// Attached to every composition-search report.
pub const SEARCH_CAVEAT: &str = "These questions ask about universal constants over all Banach triples; \
any finite family gives one-sided evidence only.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Minproj,
    Chain,
    Factor,
    Commute,
    Blocking,
    Enlargement,
    Sqrt2,
    TripleSearch,
    Constant,
    Perturb,
    Interlace,
    Limit,
}

/// A document given inline or as a path relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

impl<T: serde::de::DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(t) => Ok(t.clone()),
            Source::File(p) => read_json(&base.join(p)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<Source<SpaceSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Source<SubspaceSpec>>,
    /// `X2` for factorization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub middle: Option<Source<SubspaceSpec>>,
    /// `X3` for factorization (default: the whole space).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer: Option<Source<SubspaceSpec>>,
    /// Flat row-major ambient matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<Source<ChainSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Source<DecompositionSpec>>,
    /// Chain bases in the decomposition's ambient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_bases: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Source<SubspaceSpec>>,
    /// Flat row-major `E_i`, one per block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enlargement: Option<Source<Enlargement>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Source<SubspaceSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Source<SubspaceSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_x: Option<Source<Enlargement>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_y: Option<Source<Enlargement>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `count` seeded triples with the given dimensions in `l_inf^ambient`.
    Random {
        ambient: usize,
        dims: (usize, usize, usize),
        count: usize,
    },
    /// Every coordinate triple `span(e_1..e_d1) ⊂ span(e_1..e_d2) ⊂ l_inf^ambient`.
    Coordinate { ambient: usize },
}

impl Default for Family {
    fn default() -> Self {
        Family::Random {
            ambient: 4,
            dims: (1, 2, 4),
            count: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub seed: u64,
    /// Certification tolerance for linear-algebra residuals.
    pub tol: f64,
    /// Dimension cap for sign enumeration.
    pub max_dim: usize,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub m_list: Vec<usize>,
    pub scheme: EmbedScheme,
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
    pub outer: OuterChoice,
    pub bound_cap: f64,
    pub minimize: bool,
    pub sweeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsequence: Option<Vec<usize>>,
    pub samples: usize,
    pub pairs: Vec<(usize, usize)>,
    pub tolerance: f64,
    pub tau_grid: Vec<f64>,
    pub budget: usize,
    pub family: Family,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            seed: 0,
            tol: tol::LINALG,
            max_dim: tol::DIMENSION_CAP,
            tau: 0.05,
            m: None,
            m_list: Vec::new(),
            scheme: EmbedScheme::Grid,
            n: 6,
            k: 1,
            gamma: 0.9,
            length: 8,
            eps: None,
            eps_list: None,
            eps_schedule: None,
            outer: OuterChoice::Orthogonal,
            bound_cap: 1e6,
            minimize: false,
            sweeps: 50,
            subsequence: None,
            samples: 8,
            pairs: vec![(1, 2), (1, 3), (2, 3), (2, 4)],
            tolerance: 1e-3,
            tau_grid: vec![0.01, 0.05, 0.2],
            budget: 4,
            family: Family::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            inputs: Inputs::default(),
            params: Params::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub environment: Environment,
    pub config: ExperimentConfig,
    /// Every certification passed and no module error occurred.
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub results: Value,
    /// CSV tables by name.
    pub tables: BTreeMap<String, String>,
    pub notes: Vec<String>,
    /// Seconds per stage; kept out of `report.json`.
    #[serde(skip)]
    pub timing: Vec<(String, f64)>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn timing_json(&self) -> String {
        let m: Vec<Value> = self.timing.iter().map(|(s, t)| json!({"stage": s, "seconds": t})).collect();
        serde_json::to_string_pretty(&json!({ "timing": m })).expect("timing serializes")
    }

    /// Writes `report.json`, `timing.json` and one CSV per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("timing.json"), self.timing_json())?;
        for (name, csv) in &self.tables {
            std::fs::write(dir.join(format!("{name}.csv")), csv)?;
        }
        Ok(())
    }
}

/// Collects results, tables and the pass/fail state of one run.
struct Run<'a> {
    cfg: &'a ExperimentConfig,
    base: &'a Path,
    ok: bool,
    tables: BTreeMap<String, String>,
    notes: Vec<String>,
    timing: Vec<(String, f64)>,
    clock: Instant,
}

impl Run<'_> {
    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timing.push((name.into(), now.duration_since(self.clock).as_secs_f64()));
        self.clock = now;
    }

    fn check(&mut self, residual: f64, tolerance: f64) -> bool {
        let pass = residual <= tolerance;
        self.ok &= pass;
        pass
    }

    fn norm_opts(&self) -> NormOptions {
        NormOptions {
            cap: self.cfg.params.max_dim,
            seed: self.cfg.params.seed,
            ..NormOptions::default()
        }
    }

    fn minproj_opts(&self) -> MinProjOptions {
        MinProjOptions {
            tau: self.cfg.params.tau,
            minmax: MinMaxOptions {
                norm: self.norm_opts(),
                ..MinMaxOptions::default()
            },
            ..MinProjOptions::default()
        }
    }

    fn preset(&self) -> Option<&str> {
        self.cfg.inputs.preset.as_deref()
    }

    fn space(&self) -> Result<Arc<NormedSpace>> {
        let s = self
            .cfg
            .inputs
            .space
            .as_ref()
            .ok_or_else(|| Error::Parse("missing input `space`".into()))?;
        Ok(Arc::new(s.load(self.base)?.build()?))
    }

    fn subspace(&self, src: &Option<Source<SubspaceSpec>>, name: &str, amb: &Arc<NormedSpace>) -> Result<Subspace> {
        src.as_ref()
            .ok_or_else(|| Error::Parse(format!("missing input `{name}`")))?
            .load(self.base)?
            .build(amb)
    }

    fn decomposition(&self) -> Result<Decomposition> {
        let o = self.norm_opts();
        if let Some(d) = &self.cfg.inputs.decomposition {
            return d.load(self.base)?.build(&o);
        }
        let p = &self.cfg.params;
        match self.preset().unwrap_or("coordinate") {
            "coordinate" => Decomposition::coordinate(Arc::new(NormedSpace::linf(p.n)), &vec![1; p.n], &o),
            "skew" => {
                let s = Arc::new(NormedSpace::linf(2));
                let w1 = Subspace::new(s.clone(), Matrix::from_column_slice(2, 1, &[1.0, 0.0]), "W1")?;
                let w2 = Subspace::new(s.clone(), Matrix::from_column_slice(2, 1, &[1.0, p.gamma]), "W2")?;
                Decomposition::new(s, vec![w1, w2], &o)
            }
            "random" => {
                let mut r = instances::rng(p.seed);
                instances::random_decomposition(&mut r, Arc::new(NormedSpace::linf(p.n)), &vec![1; p.n], 0.3, &o)
            }
            other => Err(Error::Parse(format!("unknown decomposition preset `{other}`"))),
        }
    }

    fn chain(&self) -> Result<Chain> {
        if let Some(c) = &self.cfg.inputs.chain {
            return c.load(self.base)?.build();
        }
        let p = &self.cfg.params;
        match self.preset().unwrap_or("gamma") {
            "gamma" => instances::gamma_chain(p.length.max(8), p.gamma, p.length),
            "coordinate" => instances::coordinate_chain(p.length, p.length),
            other => Err(Error::Parse(format!("unknown chain preset `{other}`"))),
        }
    }

    fn interlaced(&mut self) -> Result<InterlacedSystem> {
        let o = self.norm_opts();
        let p = self.cfg.params.clone();
        if self.cfg.inputs.decomposition.is_none() {
            match self.preset().unwrap_or("coordinate") {
                "coordinate" => return instances::coordinate_interlaced(p.n, &o),
                "random" => return instances::random_interlaced(p.seed, p.n.max(4), p.outer, &o),
                "tail" => {
                    let d = Decomposition::coordinate(Arc::new(NormedSpace::linf(p.n)), &vec![1; p.n], &o)?;
                    let chain = instances::tail_chain(p.n, p.gamma)?;
                    return build_interlaced(&d, &chain, p.eps_schedule.as_deref(), p.outer, &o);
                }
                other => return Err(Error::Parse(format!("unknown interlacing preset `{other}`"))),
            }
        }
        let d = self.decomposition()?;
        let bases = self
            .cfg
            .inputs
            .chain_bases
            .as_ref()
            .ok_or_else(|| Error::Parse("missing input `chain_bases`".into()))?;
        let chain = bases
            .iter()
            .enumerate()
            .map(|(i, b)| {
                SubspaceSpec {
                    basis: b.clone(),
                    label: Some(format!("X{}", i + 1)),
                }
                .build(d.ambient())
            })
            .collect::<Result<Vec<_>>>()?;
        build_interlaced(&d, &chain, p.eps_schedule.as_deref(), p.outer, &o)
    }
}

fn flat(m: &Matrix) -> Value {
    json!(matrix_to_flat(m))
}

fn certificate_value<T: Serialize>(c: &T) -> Value {
    serde_json::to_value(c).unwrap_or(Value::Null)
}

/// Runs one experiment; module errors are captured in the report.
pub fn run(config: &ExperimentConfig, base: &Path) -> Report {
    let mut r = Run {
        cfg: config,
        base,
        ok: true,
        tables: BTreeMap::new(),
        notes: Vec::new(),
        timing: Vec::new(),
        clock: Instant::now(),
    };
    let results = dispatch(&mut r);
    let (results, error) = match results {
        Ok(v) => (v, None),
        Err(e) => (Value::Null, Some(e.to_string())),
    };
    Report {
        schema: SCHEMA,
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").into(),
            tolerances: Tolerances {
                linalg: config.params.tol,
                dimension_cap: config.params.max_dim,
                ..Tolerances::default()
            },
        },
        config: config.clone(),
        ok: r.ok && error.is_none(),
        error,
        results,
        tables: r.tables,
        notes: r.notes,
        timing: r.timing,
    }
}

fn dispatch(r: &mut Run) -> Result<Value> {
    match r.cfg.kind {
        Kind::Minproj => run_minproj(r),
        Kind::Chain => run_chain(r),
        Kind::Factor => run_factor(r),
        Kind::Constant => run_constant(r),
        Kind::Perturb => run_perturb(r),
        Kind::Blocking => run_blocking(r),
        Kind::Interlace => run_interlace(r),
        Kind::Commute => run_commute(r),
        Kind::Limit => run_limit(r),
        Kind::Enlargement => run_enlargement(r),
        Kind::Sqrt2 => run_sqrt2(r),
        Kind::TripleSearch => run_triple_search(r),
    }
}

fn run_minproj(r: &mut Run) -> Result<Value> {
    let p = r.cfg.params.clone();
    let opts = r.minproj_opts();
    let amb = r.space()?;
    if r.cfg.inputs.subspace.is_none() {
        // absolute constant of the space itself along resolutions
        let ms = if p.m_list.is_empty() { vec![p.m.unwrap_or(16)] } else { p.m_list.clone() };
        let est = lambda_absolute_approx(&amb, &ms, p.scheme, &opts)?;
        r.stage("lambda_absolute_approx");
        let mut csv = String::from("m,eta,eta_exact,lambda,lower,certificate\n");
        let mut rows = Vec::new();
        for e in &est {
            let cert = certificate_value(&e.result.certificate);
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.m,
                e.eta,
                e.eta_exact,
                e.result.lambda,
                e.result.lower,
                cert["kind"].as_str().unwrap_or("")
            ));
            r.ok &= e.result.converged;
            rows.push(json!({
                "m": e.m,
                "eta": e.eta,
                "eta_certificate": if e.eta_exact { "exact" } else { "sampled" },
                "lambda": e.result.lambda,
                "lower": e.result.lower,
                "tau": e.result.tau,
                "certificate": cert,
            }));
        }
        r.tables.insert("convergence".into(), csv);
        return Ok(json!({ "estimates": rows }));
    }
    let y = r.subspace(&r.cfg.inputs.subspace, "subspace", &amb)?;
    let full = Subspace::full(amb.clone());
    let res = minimal_projection(&full, &y, None, &opts)?;
    r.stage("minimal_projection");
    let recheck = res.projection.norm(&opts.minmax.norm)?;
    r.stage("recheck");
    let drift = (recheck.value - res.lambda).abs();
    r.check(drift, tol::OPTIMIZATION * res.lambda.max(1.0));
    r.ok &= res.converged;
    Ok(json!({
        "lambda": res.lambda,
        "lower": res.lower,
        "tau": res.tau,
        "certificate": certificate_value(&res.certificate),
        "converged": res.converged,
        "projection_matrix": flat(res.projection.matrix()),
        "recomputed_norm": recheck.value,
        "recomputed_certificate": certificate_value(&recheck.certificate),
        "idempotence_residual": res.projection.idempotence_residual(),
        "image_residual": res.projection.image_residual(),
    }))
}

fn run_chain(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let p = r.cfg.params.clone();
    let mut chain = r.chain()?;
    if let Some(picks) = &p.subsequence {
        chain = chain.subsequence(picks)?;
    }
    if chain.steps().is_none() {
        chain = chain.with_orthogonal_steps()?;
    }
    let table = composition_table(&chain, &o)?;
    r.stage("composition_table");
    r.tables.insert("composition".into(), table.to_csv());
    let mut out = json!({
        "length": chain.len(),
        "sup": table.sup,
        "argmax": table.argmax,
        "entries": table.entries,
    });
    if p.minimize {
        let b = minimize_chain_blowup(
            &chain,
            &BlowupOptions {
                sweeps: p.sweeps,
                minmax: MinMaxOptions {
                    norm: o,
                    ..MinMaxOptions::default()
                },
            },
        )?;
        r.stage("minimize_chain_blowup");
        let t = composition_table(&b.chain, &o)?;
        r.tables.insert("composition_minimized".into(), t.to_csv());
        out["minimized"] = json!({
            "sup": b.sup,
            "default_sup": b.default_sup,
            "improvement_ratio": if b.sup > 0.0 { b.default_sup / b.sup } else { 1.0 },
            "sweeps": b.sweeps,
            "budget_exhausted": b.budget_exhausted,
            "steps": b.chain.steps().unwrap_or(&[]).iter().map(|s| flat(s.matrix())).collect::<Vec<_>>(),
        });
    }
    Ok(out)
}

fn run_factor(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let tolv = r.cfg.params.tol;
    let (x1, x2, p) = if r.preset() == Some("random") {
        let (x1, x2, _, p) = instances::random_triple(r.cfg.params.seed, 8, 6)?;
        (x1, x2, p)
    } else {
        let amb = r.space()?;
        let x1 = r.subspace(&r.cfg.inputs.subspace, "subspace", &amb)?;
        let x2 = r.subspace(&r.cfg.inputs.middle, "middle", &amb)?;
        let x3 = match &r.cfg.inputs.outer {
            Some(_) => r.subspace(&r.cfg.inputs.outer, "outer", &amb)?,
            None => Subspace::full(amb.clone()),
        };
        let p = match &r.cfg.inputs.projection {
            Some(m) => Projection::new(x3, x1.clone(), matrix_from_flat(m, amb.dim(), amb.dim())?)?,
            None => minimal_projection(&x3, &x1, None, &r.minproj_opts())?.projection,
        };
        (x1, x2, p)
    };
    let (p1, p2) = factor_through(&p, &x2)?;
    r.stage("factor_through");
    let diff = p.matrix() - p1.matrix() * p2.matrix();
    let residual = restricted_norm(&diff, p.domain(), p.domain().ambient(), &o)?;
    let ker = p.kernel()?;
    let ker1 = p1.kernel()?;
    let expected = ker.intersection(&x2)?;
    let kernel_residual = ker1.containment_residual(&expected).max(expected.containment_residual(&ker1));
    r.check(residual.value, 1e-8);
    r.check(kernel_residual, tolv);
    r.check((ker1.dim() as f64 - expected.dim() as f64).abs(), 0.0);
    let _ = x1;
    Ok(json!({
        "residual": residual.value,
        "residual_certificate": certificate_value(&residual.certificate),
        "kernel_dim": ker1.dim(),
        "expected_kernel_dim": expected.dim(),
        "kernel_residual": kernel_residual,
        "p1": flat(p1.matrix()),
        "p2": flat(p2.matrix()),
        "p1_idempotence": p1.idempotence_residual(),
        "p2_idempotence": p2.idempotence_residual(),
        "p1_norm": p1.norm(&o)?.value,
        "p2_norm": p2.norm(&o)?.value,
    }))
}

fn decomposition_value(d: &Decomposition) -> Value {
    json!({
        "ambient_dim": d.ambient().dim(),
        "blocks": d.blocks().iter().map(|b| b.dim()).collect::<Vec<_>>(),
        "constant": d.constant(),
        "certificate": certificate_value(&d.certificate()),
        "law_residual": d.law_residual(),
    })
}

fn run_constant(r: &mut Run) -> Result<Value> {
    let d = r.decomposition()?;
    r.stage("decomposition");
    r.check(d.law_residual(), r.cfg.params.tol);
    Ok(decomposition_value(&d))
}

fn run_perturb(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let p = r.cfg.params.clone();
    let d = r.decomposition()?;
    let n = d.ambient().dim();
    let (es, claimed) = match &r.cfg.inputs.perturbations {
        Some(list) => (
            list.iter().map(|m| matrix_from_flat(m, n, n)).collect::<Result<Vec<_>>>()?,
            p.eps_list.clone(),
        ),
        None => {
            let eps = match (&p.eps_list, p.eps) {
                (Some(l), _) => l.clone(),
                (None, Some(e)) => vec![e; d.len()],
                (None, None) => vec![1.0 / (8.0 * d.constant() * d.len() as f64); d.len()],
            };
            (random_perturbations(&d, &eps, p.seed, &o)?, Some(eps))
        }
    };
    let out = perturb_decomposition(&d, &es, claimed.as_deref(), &o)?;
    r.stage("perturb_decomposition");
    r.check(out.decomposition.law_residual(), p.tol);
    Ok(json!({
        "original": decomposition_value(&d),
        "perturbed": decomposition_value(&out.decomposition),
        "measured": out.measured,
        "eps": out.eps,
        "sum": out.sum,
        "bound": out.bound,
    }))
}

fn run_blocking(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let p = r.cfg.params.clone();
    let (d, h, k, eps) = match r.preset() {
        Some("golden") => instances::golden_blocking(&o)?,
        Some("random") => instances::random_blocking(p.seed, &o)?,
        _ => {
            let d = r.decomposition()?;
            let h = r.subspace(&r.cfg.inputs.h, "h", &d.ambient().clone())?;
            (d, h, p.k, p.eps.unwrap_or(0.1))
        }
    };
    let b = blocking_step(&d, &h, k, eps, &o)?;
    r.stage("blocking_step");
    r.check(b.small_residual, eps);
    r.check(b.span_residual, 1e-8);
    r.check(b.fixed_residual, 1e-10);
    Ok(json!({
        "k": k,
        "eps": eps,
        "m": b.m,
        "delta": b.delta,
        "eq3_residual": b.small_residual,
        "eq4_inclusion_residual": b.inclusion_residual,
        "eq5_span_residual": b.span_residual,
        "fixed_residual": b.fixed_residual,
        "blocking": decomposition_value(&b.blocking),
        "perturbed": decomposition_value(&b.perturbed),
        "a": flat(&b.a),
    }))
}

fn interlaced_value(s: &InterlacedSystem) -> Value {
    json!({
        "decomposition": decomposition_value(&s.decomposition),
        "chain_dims": s.chain.iter().map(|x| x.dim()).collect::<Vec<_>>(),
        "picks": s.picks,
        "steps": s.steps.iter().map(|(e, m)| json!({"eps": e, "measured": m})).collect::<Vec<_>>(),
        "sup_outer": s.sup_outer,
        "interlacing_residual": s.interlacing_residual,
    })
}

fn run_interlace(r: &mut Run) -> Result<Value> {
    let s = r.interlaced()?;
    r.stage("build_interlaced");
    for (e, m) in s.steps.clone() {
        r.check(m, e);
    }
    Ok(interlaced_value(&s))
}

fn run_commute(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let s = r.interlaced()?;
    r.stage("build_interlaced");
    let c = commuting_construction(&s, &o)?;
    r.stage("commuting_construction");
    let t = r.cfg.params.tol;
    let cert = &c.certificates;
    for v in [cert.fixes_image, cert.image_inclusion, cert.idempotence, cert.next_law, cert.pairwise_law] {
        r.check(v, t);
    }
    r.check(cert.bound_excess, 1e-6);
    let mut csv = String::from("n,norm,bound\n");
    for (i, (a, b)) in c.norms.iter().zip(&c.bounds).enumerate() {
        csv.push_str(&format!("{},{a},{b}\n", i + 1));
    }
    r.tables.insert("commuting_norms".into(), csv);
    Ok(json!({
        "system": interlaced_value(&s),
        "certificates": certificate_value(cert),
        "norms": c.norms,
        "bounds": c.bounds,
        "sup_norm": c.norms.iter().copied().fold(0.0, f64::max),
        "projections": c.projections.iter().map(|p| flat(p.matrix())).collect::<Vec<_>>(),
    }))
}

fn run_limit(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let p = r.cfg.params.clone();
    let mut chain = r.chain()?;
    let top = chain.subspaces().last().map(|x| x.is_full()).unwrap_or(false);
    if !top {
        // the limit runs up to the whole space
        let mut subs = chain.subspaces().to_vec();
        subs.push(Subspace::full(subs[0].ambient().clone()));
        chain = Chain::new(subs)?;
    }
    if chain.steps().is_none() {
        chain = chain.with_orthogonal_steps()?;
    }
    let l = strong_limit_simulation(&chain, p.bound_cap, &o)?;
    r.stage("strong_limit_simulation");
    r.check(l.commute_residual, p.tol);
    let prof = convergence_profile(&l, p.samples, p.seed)?;
    let mut csv = String::from("sample,n,distance\n");
    for (i, row) in prof.iter().enumerate() {
        for (n, d) in row.iter().enumerate() {
            csv.push_str(&format!("{i},{},{d}\n", n + 1));
        }
    }
    r.tables.insert("convergence_profile".into(), csv);
    r.notes
        .push("Convergence profiles are reported for inspection only; at finite length they carry no pass/fail meaning.".into());
    Ok(json!({
        "length": chain.len(),
        "norms": l.norms,
        "max_norm": l.max_norm,
        "table_sup": l.table_sup,
        "bound_cap": p.bound_cap,
        "commute_residual": l.commute_residual,
    }))
}

fn run_enlargement(r: &mut Run) -> Result<Value> {
    let o = r.norm_opts();
    let p = r.cfg.params.clone();
    let mp = r.minproj_opts();
    match r.preset() {
        Some("example") => {
            let rep = example_experiment(p.k, p.n, p.m.unwrap_or(32), &mp)?;
            r.stage("example_experiment");
            r.ok &= rep.holds;
            return Ok(serde_json::to_value(&rep)?);
        }
        Some("coordinate_pair") | Some("euclidean_pair") => {
            let (z, x, y) = if r.preset() == Some("coordinate_pair") {
                instances::coordinate_pair(p.n.max(2), p.k.clamp(1, p.n.max(2) - 1))?
            } else {
                instances::embedded_euclidean_pair(p.m.unwrap_or(16))?
            };
            return direct_sum(r, &z, &x, &y, None, None, &o, &mp);
        }
        Some(other) => return Err(Error::Parse(format!("unknown enlargement preset `{other}`"))),
        None => {}
    }
    let amb = r.space()?;
    let z = Subspace::full(amb.clone());
    if r.cfg.inputs.x.is_some() {
        let x = r.subspace(&r.cfg.inputs.x, "x", &amb)?;
        let y = r.subspace(&r.cfg.inputs.y, "y", &amb)?;
        let ax = r.cfg.inputs.a_x.as_ref().map(|s| s.load(r.base)).transpose()?;
        let ay = r.cfg.inputs.a_y.as_ref().map(|s| s.load(r.base)).transpose()?;
        return direct_sum(r, &z, &x, &y, ax, ay, &o, &mp);
    }
    let x = r.subspace(&r.cfg.inputs.subspace, "subspace", &amb)?;
    let proj = match &r.cfg.inputs.projection {
        Some(m) => Projection::new(z, x.clone(), matrix_from_flat(m, amb.dim(), amb.dim())?)?,
        None => minimal_projection(&z, &x, None, &mp)?.projection,
    };
    let norm = proj.norm(&o)?;
    let a = match &r.cfg.inputs.enlargement {
        Some(s) => s.load(r.base)?,
        None => Enlargement::ball(&x, norm.value)?,
    };
    let c = contains_image(&proj, &a, &o)?;
    r.stage("contains_image");
    r.ok &= c.holds;
    Ok(json!({
        "projection_norm": norm.value,
        "projection_certificate": certificate_value(&norm.certificate),
        "containment": certificate_value(&c),
    }))
}

#[allow(clippy::too_many_arguments)]
fn direct_sum(
    r: &mut Run,
    z: &Subspace,
    x: &Subspace,
    y: &Subspace,
    ax: Option<Enlargement>,
    ay: Option<Enlargement>,
    o: &NormOptions,
    mp: &MinProjOptions,
) -> Result<Value> {
    // default bodies: the relative constants of each summand with the other killed
    let ball = |s: &Subspace, kill: &Subspace| -> Result<(Enlargement, f64)> {
        let k = if kill.dim() == 0 { None } else { Some(kill) };
        let l = minimal_projection(z, s, k, mp)?.lambda;
        Ok((Enlargement::ball(s, l)?, l))
    };
    let (ax, lx) = match ax {
        Some(a) => (a, f64::NAN),
        None => ball(x, y)?,
    };
    let (ay, ly) = match ay {
        Some(a) => (a, f64::NAN),
        None => ball(y, x)?,
    };
    let sum = l1_sum_construction(x, y, z, &ax, &ay, &MinimalRealizer(*mp))?;
    r.stage("l1_sum_construction");
    let c = contains_image(&sum.projection, &ax.sum(&ay)?, o)?;
    r.stage("contains_image");
    r.check(sum.identity_residual, r.cfg.params.tol);
    r.check(sum.cross_residual, r.cfg.params.tol);
    r.check(-c.margin, 1e-8);
    let nan_free = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    Ok(json!({
        "ambient_dim": z.ambient_dim(),
        "lambda_x": nan_free(lx),
        "lambda_y": nan_free(ly),
        "conditions": certificate_value(&sum.conditions),
        "identity_residual": sum.identity_residual,
        "cross_residual": sum.cross_residual,
        "projection_norm": sum.projection.norm(o)?.value,
        "containment": certificate_value(&c),
    }))
}

fn run_sqrt2(r: &mut Run) -> Result<Value> {
    let p = r.cfg.params.clone();
    let mp = r.minproj_opts();
    let m = p.m.unwrap_or(64);
    let mut csv = format!("{}\n", Sqrt2Report::CSV_HEADER);
    let mut rows: Vec<Sqrt2Report> = Vec::new();
    for &(k, n) in &p.pairs {
        let rep = sqrt2_bound_check(k, n, m, p.tolerance, &mp)?;
        r.stage(&format!("sqrt2 k={k} n={n}"));
        r.ok &= rep.inequality_holds && rep.p2_bound_holds && rep.margin >= -1e-8;
        csv.push_str(&rep.csv_row());
        csv.push('\n');
        rows.push(rep);
    }
    r.tables.insert("sqrt2".into(), csv);
    Ok(json!({ "m": m, "rows": rows }))
}

// ---------------------------------------------------------------------------
// composition search

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleRow {
    pub triple: usize,
    pub dims: (usize, usize, usize),
    pub tau: f64,
    /// `λ(X1, X3)` and `λ(X2, X3)`.
    pub lambda_13: f64,
    pub lambda_23: f64,
    pub p2_norm: f64,
    pub composite_norm: f64,
    /// `||P1 P2|| / λ(X1, X3)`.
    pub c2: f64,
    pub rounds: usize,
    /// The last round still improved the composite by more than `1e-9`.
    pub stagnation_flag: bool,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub rows: Vec<TripleRow>,
    /// Running maximum of `C2` per `τ`.
    pub max_c2: Vec<(f64, f64)>,
    pub triples: usize,
}

/// Minimizes `||P1 P2||` over `P1: X2 -> X1` and `(1+τ)`-minimal
/// `P2: X3 -> X2`, alternating between the two factors; each half-step is a
/// constrained minimax solved exactly for polyhedral norms.
pub fn search_triple(
    x1: &Subspace,
    x2: &Subspace,
    x3: &Subspace,
    tau: f64,
    rounds: usize,
    opts: &MinProjOptions,
) -> Result<(f64, f64, f64, f64, usize, bool, bool)> {
    let r13 = minimal_projection(x3, x1, None, opts)?;
    let r23 = minimal_projection(x3, x2, None, opts)?;
    let (l13, l23) = (r13.lambda, r23.lambda);
    let cap = (1.0 + tau) * l23;
    let fam2 = ProjectionFamily::new(x3, x2, None)?;
    let fam1 = ProjectionFamily::new(x2, x1, None)?;
    let (e3, dom3) = x3.frame()?;
    let amb = x3.ambient().clone();
    // P1 starts as the restriction of a minimal projection onto X1
    let mut p1 = factor_through(&r13.projection, x2)?.0.matrix().clone();
    let mut p2 = r23.projection.matrix().clone();
    let composite = |a: &Matrix, b: &Matrix| -> Result<f64> {
        Ok(restricted_norm(&(a * b), x3, &amb, &opts.minmax.norm)?.value)
    };
    let mut best = composite(&p1, &p2)?;
    let mut exact = r13.lower >= r13.lambda - 1e-12 && r23.lower >= r23.lambda - 1e-12;
    let mut used = 0;
    let mut moving = false;
    for _ in 0..rounds {
        used += 1;
        let start = best;
        // P2 step with P1 fixed
        let (k2, q2) = fam2.param_shape();
        if k2 > 0 && q2 > 0 {
            let obj = crate::minmax::AffineTerm::new(
                &p1 * &fam2.p0 * &e3,
                &p1 * &fam2.b,
                &fam2.nt * &e3,
                dom3.clone(),
                amb.clone(),
            )?;
            let con = fam2.term()?.capped(cap);
            let g0 = fam2.params_of(&p2);
            let res = minimize_max_norm(&[obj, con], &g0, &opts.minmax)?;
            exact &= res.exact_norms;
            let cand = fam2.matrix(&res.g);
            if res.value < best - 1e-12 {
                p2 = cand;
                best = res.value;
            }
        }
        // P1 step with P2 fixed
        let (k1, q1) = fam1.param_shape();
        if k1 > 0 && q1 > 0 {
            let obj = crate::minmax::AffineTerm::new(
                &fam1.p0 * &p2 * &e3,
                fam1.b.clone(),
                &fam1.nt * &p2 * &e3,
                dom3.clone(),
                amb.clone(),
            )?;
            let g0 = fam1.params_of(&p1);
            let res = minimize_max_norm(&[obj], &g0, &opts.minmax)?;
            exact &= res.exact_norms;
            if res.value < best - 1e-12 {
                p1 = fam1.matrix(&res.g);
                best = res.value;
            }
        }
        moving = start - best > 1e-9;
        if !moving {
            break;
        }
    }
    let p2_norm = restricted_norm(&p2, x3, &amb, &opts.minmax.norm)?.value;
    let best = composite(&p1, &p2)?;
    Ok((l13, l23, p2_norm, best, used, moving, exact))
}

fn run_triple_search(r: &mut Run) -> Result<Value> {
    let p = r.cfg.params.clone();
    let mp = r.minproj_opts();
    let triples: Vec<(Subspace, Subspace, Subspace)> = match &p.family {
        Family::Random { ambient, dims, count } => (0..*count)
            .map(|i| instances::search_triple(p.seed.wrapping_mul(1_000_003).wrapping_add(i as u64), *ambient, *dims))
            .collect::<Result<Vec<_>>>()?,
        Family::Coordinate { ambient } => {
            let mut v = Vec::new();
            for d2 in 1..*ambient {
                for d1 in 1..=d2 {
                    v.push(instances::coordinate_triple(*ambient, d1, d2)?);
                }
            }
            v
        }
    };
    r.stage("family");
    let mut rows = Vec::new();
    let mut csv = String::from("triple,d1,d2,d3,tau,lambda_13,lambda_23,p2_norm,composite_norm,c2,rounds,stagnation_flag\n");
    let mut max_c2: Vec<(f64, f64)> = p.tau_grid.iter().map(|&t| (t, 0.0)).collect();
    for (i, (x1, x2, x3)) in triples.iter().enumerate() {
        for (j, &tau) in p.tau_grid.iter().enumerate() {
            let (l13, l23, p2n, comp, rounds, moving, exact) = search_triple(x1, x2, x3, tau, p.budget, &mp)?;
            let c2 = comp / l13;
            max_c2[j].1 = max_c2[j].1.max(c2);
            r.check(1.0 - 1e-6 - c2, 0.0);
            let dims = (x1.dim(), x2.dim(), x3.dim());
            csv.push_str(&format!(
                "{i},{},{},{},{tau},{l13},{l23},{p2n},{comp},{c2},{rounds},{moving}\n",
                dims.0, dims.1, dims.2
            ));
            rows.push(TripleRow {
                triple: i,
                dims,
                tau,
                lambda_13: l13,
                lambda_23: l23,
                p2_norm: p2n,
                composite_norm: comp,
                c2,
                rounds,
                stagnation_flag: moving,
                exact,
            });
        }
    }
    r.stage("search");
    r.tables.insert("triple_search".into(), csv);
    r.notes.push(SEARCH_CAVEAT.into());
    Ok(serde_json::to_value(SearchSummary {
        triples: triples.len(),
        rows,
        max_c2,
    })?)
}

/// Runs a config file, resolving inputs relative to its directory.
pub fn run_file(path: &Path) -> Result<Report> {
    let cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(run(&cfg, base))
}

/// `||x||` of a vector in a space document (the `space` subcommand).
pub fn describe_space(spec: &SpaceSpec, x: Option<&[f64]>) -> Result<Value> {
    let s = spec.build()?;
    let mut out = json!({
        "dim": s.dim(),
        "norm": s.describe(),
        "polyhedral": s.is_polyhedral(),
    });
    if let Some(v) = s.ball_vertices() {
        out["vertices"] = json!(v.len());
    }
    if let Some(f) = s.ball_facets() {
        out["facets"] = json!(f.len());
    }
    if let Some(x) = x {
        let v = linalg::Vector::from_column_slice(x);
        if v.len() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                got: v.len(),
            });
        }
        out["x_norm"] = json!(s.norm(&v)?);
        let (d, f) = s.dual_norm(&v)?;
        out["x_dual_norm"] = json!(d);
        out["x_dual_witness"] = json!(f.as_slice());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minproj_report_on_a_coordinate_line() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "minproj",
                "inputs": {"space": {"dim": 3, "norm": {"kind": "lp", "p": "inf"}},
                           "subspace": {"basis": [[1, 0, 0]]}}}"#,
        )
        .unwrap();
        let rep = run(&cfg, Path::new("."));
        assert!(rep.ok, "{:?}", rep.error);
        assert!((rep.results["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentConfig::from_json("{").is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "chain", "params": {"sede": 1}}"#).is_err());
        let rep = run(&ExperimentConfig::new(Kind::Minproj), Path::new("."));
        assert!(!rep.ok && rep.error.is_some());
    }

    #[test]
    fn coordinate_triples_have_unit_constant() {
        let mut cfg = ExperimentConfig::new(Kind::TripleSearch);
        cfg.params.family = Family::Coordinate { ambient: 3 };
        let rep = run(&cfg, Path::new("."));
        assert!(rep.ok, "{:?}", rep.error);
        for (_, c) in serde_json::from_value::<SearchSummary>(rep.results).unwrap().max_c2 {
            assert!((c - 1.0).abs() < 1e-9);
        }
    }
}

//! Verbs, their flags, and the handlers that turn them into reports.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eisfam::arith::{fmt_rat, parse_rat, rat_int, CharExponent, PadicNum, Rat, TorsionPoint};
use eisfam::cocycle::{run_checks, Bounds, CocycleConfig};
use eisfam::cyclotomic::{CycloNum, CycloPadic};
use eisfam::eisenstein::{
    dist_check_rel, dist_check_rel1, eis_qexp, galois_compat, theta_dlog_pow, theta_eisenstein_side, zeis_box, BoxQ2, EisId, EisKind, UnitAction,
};
use eisfam::family::{check_box, check_special, family_dist_check, family_f, limit_diagnostic};
use eisfam::measures::{hurwitz_interpolation_target, padic_hurwitz_zeta, AffineUnitMap};
use eisfam::qseries::QExp;
use eisfam::weightrep::{rep_check, IwahoriMat};
use thiserror::Error;

use crate::acceptance::{parse_suite, run_suite};
use crate::config::{Config, ConfigError};
use crate::report::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "eisfam", version, about = "Eisenstein series, p-adic families and cocycle checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// key=value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p: Option<u64>,
    /// working p-adic precision N
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// guard digits; results are certified to N minus this
    #[arg(long, global = true)]
    pub guard: Option<u32>,
    /// q-expansion bound in full q units, e.g. 3 or 5/2
    #[arg(long, global = true)]
    pub bound: Option<String>,
    /// trailing Mahler terms in the tail certificate
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// write the JSON report here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeriesId {
    /// E, F, Etilde2, Ec or Fc
    #[arg(long)]
    pub kind: EisKind,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub alpha: String,
    #[arg(long)]
    pub beta: String,
    /// the unit c of the c-variants
    #[arg(long)]
    pub c: Option<i64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// q-expansion of an Eisenstein series
    Eis(SeriesId),
    /// D_2^r log(r_c theta) against c^2 E_r - c^r E_r(x_2^c)
    ThetaCheck {
        #[arg(long)]
        c: i64,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        a: i64,
        #[arg(long)]
        b: i64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 0)]
        n: u32,
    },
    /// both distribution relations at the f-division points
    DistCheck {
        #[command(flatten)]
        id: SeriesId,
        #[arg(long)]
        f: i64,
    },
    /// Galois equivariance of the coefficients
    GaloisCheck {
        #[command(flatten)]
        id: SeriesId,
        #[arg(long)]
        d: i64,
    },
    /// p-adic Hurwitz zeta value from the measure
    PadicZeta {
        #[arg(long)]
        c: i64,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        j: i64,
        /// integer weight k, i.e. the character z -> z^(k-2)
        #[arg(long, conflicts_with_all = ["branch", "exponent"])]
        weight: Option<i64>,
        /// Teichmüller branch i of z -> w(z)^i <z>^s
        #[arg(long, requires = "exponent")]
        branch: Option<i64>,
        /// exponent s, a p-adic integer given as a rational
        #[arg(long, requires = "branch")]
        exponent: Option<String>,
        /// also require agreement with the Bernoulli-number target
        #[arg(long, requires = "weight")]
        check_target: bool,
    },
    /// evaluation of the family F_{c,alpha,beta}(kappa, j) at an integer weight
    FamilyEval {
        #[arg(long)]
        c: i64,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        j: i64,
        #[arg(long)]
        weight: i64,
    },
    /// special values of the family and optionally its distribution relations
    FamilyCheck {
        #[arg(long)]
        c: i64,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        j: i64,
        /// classical weight; the family is evaluated at k + j
        #[arg(long)]
        k: u32,
        #[arg(long)]
        f: Option<i64>,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        weights: Vec<i64>,
    },
    /// classical box distribution, or with --family the evaluated family box
    BoxIntegral {
        #[arg(long, default_value = "F")]
        kind: EisKind,
        /// weight; with --family the evaluation weight
        #[arg(long)]
        k: u32,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        r: String,
        #[arg(long)]
        c: Option<i64>,
        #[arg(long, requires = "c")]
        family: bool,
        #[arg(long, default_value_t = 1)]
        j: i64,
    },
    /// cocycle identity, equivariance and highest weight of the weight representation
    RepCheck {
        #[arg(long, value_delimiter = ',', default_value = "3,4,6")]
        weights: Vec<i64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        twists: Vec<i64>,
    },
    /// truncated cocycle calculus and the membership certificate
    CocycleCheck {
        #[arg(long)]
        j: u32,
        /// q-truncation B_q
        #[arg(long)]
        trunc_q: Option<String>,
        /// t-truncation B_t; default j + 2
        #[arg(long)]
        trunc_t: Option<u32>,
        /// T-truncation B_T
        #[arg(long = "trunc-T")]
        trunc_big_t: Option<u32>,
        /// precision of the membership certificate
        #[arg(long, default_value_t = 12)]
        membership_precision: i64,
    },
    /// acceptance criteria: "all" or a comma-separated list of numbers 1 to 9
    Acceptance {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// Defaults, environment, config file, then flags; validated.
pub fn resolve_config(g: &GlobalOpts) -> Result<Config, CliError> {
    let mut cfg = Config::from_env()?;
    if let Some(path) = &g.config {
        cfg.load_file(path)?;
    }
    if let Some(p) = g.p {
        cfg.p = p;
    }
    if let Some(n) = g.precision {
        cfg.precision = n;
    }
    if let Some(g) = g.guard {
        cfg.guard = g;
    }
    if let Some(b) = &g.bound {
        cfg.set("q_bound", b)?;
    }
    if let Some(w) = g.window {
        cfg.mahler_window = w;
    }
    if let Some(o) = &g.output {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn point(s: &str) -> Result<TorsionPoint, CliError> {
    parse_rat(s).map(|r| TorsionPoint::from_rat(&r)).map_err(|e| CliError::Usage(e.to_string()))
}

fn rational(s: &str) -> Result<Rat, CliError> {
    parse_rat(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn series_id(s: &SeriesId, p: u64) -> Result<EisId, CliError> {
    let (alpha, beta) = (point(&s.alpha)?, point(&s.beta)?);
    let id = match s.c {
        Some(c) => EisId::with_c(s.kind, s.k, alpha, beta, UnitAction::new(c, p).map_err(|e| CliError::Usage(e.to_string()))?),
        None => EisId::new(s.kind, s.k, alpha, beta),
    };
    id.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(id)
}

fn cyclo_series(s: &QExp<CycloNum>) -> serde_json::Value {
    s.to_json(CycloNum::to_json)
}

fn padic_series(s: &QExp<CycloPadic>) -> serde_json::Value {
    s.to_json(CycloPadic::to_json)
}

fn id_json(id: &EisId) -> serde_json::Value {
    serde_json::json!({
        "kind": id.kind.to_string(),
        "k": id.k,
        "alpha": fmt_rat(&id.alpha.frac()),
        "beta": fmt_rat(&id.beta.frac()),
        "c": id.c.map(|u| u.c),
    })
}

fn mismatch_json(m: Option<Rat>) -> serde_json::Value {
    serde_json::json!(m.as_ref().map(fmt_rat))
}

/// Runs one verb. The acceptance verb calls `progress` with one line per criterion.
pub fn run(command: &Command, cfg: &Config, mut progress: impl FnMut(&str)) -> Result<Report, CliError> {
    let p = cfg.p;
    let bound = &cfg.q_bound;
    match command {
        Command::Eis(s) => {
            let id = series_id(s, p)?;
            let series = eis_qexp(&id, bound).map_err(compute)?;
            let constant = series.coeff(0).map(|c| c.as_rat().map_or_else(|| c.to_json(), |r| serde_json::json!(fmt_rat(&r))));
            Ok(Report::new("eis", true, serde_json::json!({ "id": id_json(&id), "a0": constant, "series": cyclo_series(&series) })))
        }
        Command::ThetaCheck { c, r, a, b, m, n } => {
            let lhs = theta_dlog_pow(*c, *r, *a, *b, *m, *n, p, bound).map_err(compute)?;
            let rhs = theta_eisenstein_side(*c, *r, *a, *b, *m, *n, p, bound).map_err(compute)?;
            let mismatch = lhs.first_mismatch(&rhs, |x, y| x == y);
            Ok(Report::new(
                "theta-check",
                mismatch.is_none(),
                serde_json::json!({ "holds": mismatch.is_none(), "first_mismatch": mismatch_json(mismatch), "series": cyclo_series(&lhs) }),
            ))
        }
        Command::DistCheck { id, f } => {
            let id = series_id(id, p)?;
            let rel = dist_check_rel(&id, *f, bound).map_err(compute)?;
            let rel1 = dist_check_rel1(&id, *f, bound).map_err(compute)?;
            Ok(Report::new(
                "dist-check",
                rel.holds && rel1.holds,
                serde_json::json!({ "id": id_json(&id), "f": f, "rel": rel.to_json(), "rel1": rel1.to_json() }),
            ))
        }
        Command::GaloisCheck { id, d } => {
            let id = series_id(id, p)?;
            let r = galois_compat(&id, *d, bound).map_err(compute)?;
            Ok(Report::new(
                "galois-check",
                r.sigma_holds && r.twist_holds,
                serde_json::json!({ "id": id_json(&id), "d": d, "sigma_holds": r.sigma_holds, "twist_holds": r.twist_holds }),
            ))
        }
        Command::PadicZeta { c, alpha, j, weight, branch, exponent, check_target } => {
            let map = AffineUnitMap::new(point(alpha)?, p).map_err(|e| CliError::Usage(e.to_string()))?;
            let (branch, exp) = match (weight, branch, exponent) {
                (Some(k), _, _) => (k - 2, CharExponent::Int(k - 2)),
                (None, Some(i), Some(s)) => {
                    let s = rational(s)?;
                    if s.is_integer() {
                        (*i, CharExponent::Int(s.to_integer().try_into().map_err(|_| CliError::Usage("exponent too large".into()))?))
                    } else {
                        (*i, CharExponent::Padic(PadicNum::from_rat(cfg.ctx(), &s)))
                    }
                }
                _ => return Err(CliError::Usage("give --weight or both --branch and --exponent".into())),
            };
            let z = padic_hurwitz_zeta(*c, &map, *j, branch, &exp, cfg.ctx(), cfg.certified(), cfg.mahler_window).map_err(compute)?;
            let mut result = serde_json::json!({
                "value": z.value.to_json(),
                "amice_terms": z.amice_terms,
                "certificate": z.certificate,
                "certified_precision": cfg.certified(),
            });
            let mut pass = z.certificate >= cfg.certified();
            if let Some(k) = weight.filter(|k| k - j >= 1) {
                let target = hurwitz_interpolation_target(*c, &map, *j, (k - j) as usize, cfg.ctx()).map_err(compute)?;
                let agreement = z.value.agreement(&target);
                let matches = agreement >= cfg.certified();
                result["target"] = target.to_json();
                result["target_agreement"] = serde_json::json!(agreement);
                result["matches_target"] = serde_json::json!(matches);
                if *check_target {
                    pass &= matches;
                }
            } else if *check_target {
                return Err(CliError::Usage("the Bernoulli target needs weight - j >= 1".into()));
            }
            Ok(Report::new("padic-zeta", pass, result))
        }
        Command::FamilyEval { c, alpha, beta, j, weight } => {
            let fam = family_f(*c, point(alpha)?, point(beta)?, *j, p, bound).map_err(compute)?;
            let ev = fam.ev_weight(*weight, cfg.eval_precision()).map_err(compute)?;
            Ok(Report::new(
                "family-eval",
                true,
                serde_json::json!({ "weight": weight, "certified_precision": cfg.certified(), "series": padic_series(&ev) }),
            ))
        }
        Command::FamilyCheck { c, alpha, beta, j, k, f, weights } => {
            let (a, b) = (point(alpha)?, point(beta)?);
            let special = check_special(*c, a, b, *j, *k, bound, cfg.eval_precision()).map_err(compute)?;
            let mut pass = special.holds;
            let mut result = serde_json::json!({ "special": special.to_json(), "certified_precision": cfg.certified() });
            if let Some(f) = f {
                let dist = family_dist_check(*c, a, b, *j, *f, bound, weights, cfg.eval_precision()).map_err(compute)?;
                pass &= dist.holds();
                result["distribution"] = dist.to_json();
            }
            Ok(Report::new("family-check", pass, result))
        }
        Command::BoxIntegral { kind, k, a, b, r, c, family, j } => {
            let bx = BoxQ2::new(rational(a)?, rational(b)?, rational(r)?).map_err(|e| CliError::Usage(e.to_string()))?;
            if *family {
                let c = c.expect("clap requires c with --family");
                let chk = check_box(c, *j, *k as i64, &bx, bound, cfg.eval_precision()).map_err(compute)?;
                return Ok(Report::new("box-integral", chk.holds, serde_json::json!({ "family": chk.to_json(), "certified_precision": cfg.certified() })));
            }
            let unit = c.map(|c| UnitAction::new(c, p)).transpose().map_err(|e| CliError::Usage(e.to_string()))?;
            let series = zeis_box(*kind, *k, &bx, unit, bound).map_err(compute)?;
            Ok(Report::new("box-integral", true, serde_json::json!({ "kind": kind.to_string(), "k": k, "series": cyclo_series(&series) })))
        }
        Command::RepCheck { weights, twists } => {
            let mats = [(1, 1, 0, 1), (1, 0, 0, 2), (1, 0, p as i64, 1), (3, 2, 2 * p as i64, 7)]
                .into_iter()
                .map(|(a, b, c, d)| IwahoriMat::from_ints(p, a, b, c, d))
                .collect::<Result<Vec<_>, _>>()
                .map_err(compute)?;
            let points = [rat_int(0), rat_int(2), Rat::new(1.into(), 3.into())];
            let r = rep_check(&mats, &points, weights, twists).map_err(compute)?;
            Ok(Report::new("rep-check", r.holds(), r.to_json()))
        }
        Command::CocycleCheck { j, trunc_q, trunc_t, trunc_big_t, membership_precision } => {
            let mut cc = CocycleConfig::standard(*j);
            if cc.p != p {
                return Err(CliError::Usage(format!("the cocycle configuration is set up at p = {}, not {p}", cc.p)));
            }
            let q = match trunc_q {
                Some(s) => rational(s)?,
                None => cfg.trunc_q.clone(),
            };
            let t = trunc_t.unwrap_or(if cfg.trunc_t == 0 { j + 2 } else { cfg.trunc_t });
            cc.bounds = Bounds::new(q, t, trunc_big_t.unwrap_or(cfg.trunc_big_t), 0);
            cc.precision = *membership_precision;
            let r = run_checks(&cc).map_err(compute)?;
            let mut result = r.to_json();
            let limit = limit_diagnostic(2, 1, 0, p, i64::from(*j), 2, 3, &rat_int(1), cfg.eval_precision()).map_err(compute)?;
            result["limit_diagnostic"] = limit.to_json();
            Ok(Report::new("cocycle-check", r.holds(), result))
        }
        Command::Acceptance { suite } => {
            let criteria = parse_suite(suite).map_err(CliError::Usage)?;
            let outcomes = run_suite(&criteria, cfg, |o| progress(&o.line()));
            let pass = outcomes.iter().all(|o| o.holds());
            let list: Vec<_> = outcomes.iter().map(|o| o.to_json()).collect();
            Ok(Report::new("acceptance", pass, serde_json::json!({ "criteria": list, "all_hold": pass })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("eisfam").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_after_the_verb() {
        let cli = parse(&["eis", "--kind", "F", "--k", "1", "--alpha", "1/3", "--beta", "0", "--bound", "3"]);
        let cfg = resolve_config(&cli.global).unwrap();
        assert_eq!(cfg.q_bound, rat_int(3));
        assert!(matches!(cli.command, Command::Eis(_)));
    }

    #[test]
    fn weight_and_branch_are_exclusive() {
        let r = Cli::try_parse_from(["eisfam", "padic-zeta", "--c", "2", "--alpha", "1/5", "--j", "1", "--weight", "2", "--branch", "0", "--exponent", "0"]);
        assert!(r.is_err());
    }

    #[test]
    fn invalid_series_is_a_usage_error() {
        let cli = parse(&["eis", "--kind", "E", "--k", "2", "--alpha", "1/3", "--beta", "0"]);
        let cfg = resolve_config(&cli.global).unwrap();
        assert!(matches!(run(&cli.command, &cfg, |_| ()), Err(CliError::Usage(_))));
    }
}

//! Flat `key=value` algorithm configuration and the shipped presets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_search::LocalSearch;
use crate::neighborhood::{DomainKind, ShakeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Ga,
    Ils,
    Pso,
    Sa,
    Vns,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::Ga, Algorithm::Ils, Algorithm::Pso, Algorithm::Sa, Algorithm::Vns];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ga => "GA",
            Algorithm::Ils => "ILS",
            Algorithm::Pso => "PSO",
            Algorithm::Sa => "SA",
            Algorithm::Vns => "VNS",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GA" => Ok(Algorithm::Ga),
            "ILS" => Ok(Algorithm::Ils),
            "PSO" => Ok(Algorithm::Pso),
            "SA" => Ok(Algorithm::Sa),
            "VNS" => Ok(Algorithm::Vns),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Iteration budget formulas over `N` customers and `p` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterBudget {
    /// `floor(N·p / 5)`
    Np5,
    /// `100·p`
    P100,
    /// `max(2·N, 100)`
    N2_100,
    /// one million
    M1,
    /// An explicit count.
    Fixed(u64),
}

impl IterBudget {
    pub fn iterations(self, n: usize, p: usize) -> u64 {
        let (n, p) = (n as u64, p as u64);
        match self {
            IterBudget::Np5 => n * p / 5,
            IterBudget::P100 => 100 * p,
            IterBudget::N2_100 => (2 * n).max(100),
            IterBudget::M1 => 1_000_000,
            IterBudget::Fixed(k) => k,
        }
    }
}

/// Iteration budget for `N` customers and `p` sites.
pub fn iteration_budget(kind: IterBudget, n: usize, p: usize) -> u64 {
    kind.iterations(n, p)
}

impl FromStr for IterBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "NP/5" | "NP5" => Ok(IterBudget::Np5),
            "100P" | "P100" => Ok(IterBudget::P100),
            "2N100" | "N2_100" => Ok(IterBudget::N2_100),
            "1M" | "M1" => Ok(IterBudget::M1),
            _ => t
                .parse::<u64>()
                .map(IterBudget::Fixed)
                .map_err(|_| Error::InvalidArgument(format!("unknown iteration budget `{t}`"))),
        }
    }
}

impl std::fmt::Display for IterBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IterBudget::Np5 => f.write_str("Np/5"),
            IterBudget::P100 => f.write_str("100p"),
            IterBudget::N2_100 => f.write_str("2N100"),
            IterBudget::M1 => f.write_str("1M"),
            IterBudget::Fixed(k) => write!(f, "{k}"),
        }
    }
}

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => [$canon:literal $(, $alias:literal)*]),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                let u = s.trim().to_ascii_uppercase();
                $(if u == $canon $(|| u == $alias)* { return Ok($name::$variant); })+
                Err(Error::InvalidArgument(format!(concat!("unknown ", stringify!($name), " `{}`"), s.trim())))
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $($name::$variant => $canon),+ })
            }
        }
    };
}

keyword_enum!(
    /// Initial solution strategy.
    Generation { Rand => ["RAND"], Rand100 => ["100RAND", "RAND100"], Start => ["START"] }
);
keyword_enum!(
    /// How many sites a shake moves at step `i`.
    NextMode { Seq => ["SEQ"], Dvns => ["DVNS"] }
);
keyword_enum!(Cooling { Lin => ["LIN"], Exp => ["EXP"], None => ["NONE"] });
keyword_enum!(Accept { Elitist => ["ELITIST"], Walk => ["WALK"], Prob => ["PROB"] });
keyword_enum!(Selection { Rand => ["RAND"], Better => ["BETTERS", "BETTER"], Worse => ["WORSE", "WORSES"] });
keyword_enum!(Crossover {
    Merging => ["MERGING"],
    OnePoint => ["1POINT", "ONEPOINT"],
    CupCap => ["CUPCAP"],
    RandParent => ["1RANDPARENT", "RANDPARENT"],
});
keyword_enum!(Replacement { Comma => ["(MU,LAMBDA)", "COMMA"], Plus => ["(MU+LAMBDA)", "PLUS"] });

/// Every parameter of the five solvers. Fields that an algorithm does not
/// use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub iter: IterBudget,
    pub time_budget_s: f64,
    pub seed: u64,
    pub generation: Generation,
    pub domain: Option<(DomainKind, usize)>,
    pub localsearch: LocalSearch,
    pub localsearch2: LocalSearch,
    pub shake: ShakeMode,
    pub npert: usize,
    pub next: NextMode,
    pub t0: f64,
    pub cooling: Cooling,
    pub cooling_opt: f64,
    pub kmax: usize,
    pub big_k: usize,
    pub accept: Accept,
    pub accept_prob: f64,
    pub population: usize,
    pub lambda: usize,
    pub selection: Selection,
    pub crossover: Crossover,
    pub mutation: ShakeMode,
    pub mutation_prob: f64,
    pub replacement: Replacement,
    pub omega: f64,
    pub phi_p: f64,
    pub phi_g: f64,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            iter: IterBudget::M1,
            time_budget_s: 60.0,
            seed: 0,
            generation: Generation::Rand,
            domain: None,
            localsearch: LocalSearch::None,
            localsearch2: LocalSearch::None,
            shake: ShakeMode::Rand,
            npert: 1,
            next: NextMode::Seq,
            t0: 1.0,
            cooling: Cooling::Exp,
            cooling_opt: 0.9,
            kmax: 5,
            big_k: 10,
            accept: Accept::Elitist,
            accept_prob: 0.0,
            population: 10,
            lambda: 10,
            selection: Selection::Rand,
            crossover: Crossover::OnePoint,
            mutation: ShakeMode::Rand,
            mutation_prob: 0.0,
            replacement: Replacement::Plus,
            omega: 0.5,
            phi_p: 0.5,
            phi_g: 0.5,
        }
    }

    /// The tuned configuration shipped for `algorithm`.
    pub fn preset(algorithm: Algorithm) -> Self {
        let text = match algorithm {
            Algorithm::Ga => include_str!("../../presets/ga.cfg"),
            Algorithm::Ils => include_str!("../../presets/ils.cfg"),
            Algorithm::Pso => include_str!("../../presets/pso.cfg"),
            Algorithm::Sa => include_str!("../../presets/sa.cfg"),
            Algorithm::Vns => include_str!("../../presets/vns.cfg"),
        };
        Self::parse(text).expect("shipped preset parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parse `key=value` lines. `#` starts a comment, `---` leaves a key
    /// unset, keys are case-insensitive and `_`/`.` inside them are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, (String, String)> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {} is not `key=value`", lineno + 1),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let norm = normalize_key(k);
            if !KNOWN_KEYS.contains(&norm.as_str()) {
                return Err(Error::Config { key: k.to_string(), message: "unknown configuration key".into() });
            }
            if v == "---" || v.is_empty() {
                continue;
            }
            if raw.insert(norm, (k.to_string(), v.to_string())).is_some() {
                return Err(Error::Config { key: k.to_string(), message: "key given twice".into() });
            }
        }
        let get = |key: &str| raw.get(key);
        let (_, alg) = get("algorithm").ok_or_else(|| Error::Config {
            key: "algorithm".into(),
            message: "missing".into(),
        })?;
        let algorithm: Algorithm = value("algorithm", alg)?;
        let mut c = Self::new(algorithm);

        fn set<V: FromStr>(raw: &BTreeMap<String, (String, String)>, key: &str, slot: &mut V) -> Result<()> {
            if let Some((orig, v)) = raw.get(key) {
                *slot = v.parse::<V>().map_err(|_| Error::Config {
                    key: orig.clone(),
                    message: format!("invalid value `{v}`"),
                })?;
            }
            Ok(())
        }
        set(&raw, "iter", &mut c.iter)?;
        set(&raw, "timebudget", &mut c.time_budget_s)?;
        set(&raw, "seed", &mut c.seed)?;
        set(&raw, "generation", &mut c.generation)?;
        set(&raw, "shake", &mut c.shake)?;
        set(&raw, "npert", &mut c.npert)?;
        set(&raw, "next", &mut c.next)?;
        set(&raw, "t0", &mut c.t0)?;
        set(&raw, "cooling", &mut c.cooling)?;
        set(&raw, "coolingopt", &mut c.cooling_opt)?;
        set(&raw, "kmax", &mut c.kmax)?;
        set(&raw, "k", &mut c.big_k)?;
        set(&raw, "accept", &mut c.accept)?;
        set(&raw, "acceptprob", &mut c.accept_prob)?;
        set(&raw, "population", &mut c.population)?;
        set(&raw, "lambda", &mut c.lambda)?;
        set(&raw, "selection", &mut c.selection)?;
        set(&raw, "crossover", &mut c.crossover)?;
        set(&raw, "mutation", &mut c.mutation)?;
        set(&raw, "mutationprob", &mut c.mutation_prob)?;
        set(&raw, "mutprob", &mut c.mutation_prob)?;
        set(&raw, "replacement", &mut c.replacement)?;
        set(&raw, "omega", &mut c.omega)?;
        set(&raw, "phip", &mut c.phi_p)?;
        set(&raw, "phig", &mut c.phi_g)?;

        if let Some((orig, kind)) = get("domain") {
            let kind: DomainKind = value(orig, kind)?;
            let mut d = 0usize;
            set(&raw, "d", &mut d)?;
            if d == 0 {
                return Err(Error::Config { key: "d".into(), message: "domain model needs d >= 1".into() });
            }
            c.domain = Some((kind, d));
        } else if get("d").is_some() {
            return Err(Error::Config { key: "d".into(), message: "d given without a domain model".into() });
        }
        c.localsearch = local_search(&raw, "localsearch", &["laux1", "laux"], &["impparam1", "impparam"])?;
        c.localsearch2 = local_search(&raw, "localsearch2", &["laux2"], &["impparam2"])?;
        c.validate()?;
        Ok(c)
    }

    /// Check parameter ranges and cross-parameter requirements.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::Config { key: key.into(), message });
        let unit = |key: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                bad(key, format!("{v} is outside [0, 1]"))
            }
        };
        if !(self.time_budget_s > 0.0) {
            return bad("time_budget", format!("{} is not positive", self.time_budget_s));
        }
        self.localsearch.validate().map_err(|e| Error::Config { key: "localsearch".into(), message: e.to_string() })?;
        self.localsearch2.validate().map_err(|e| Error::Config { key: "localsearch2".into(), message: e.to_string() })?;
        let uses_imp = |ls: &LocalSearch| matches!(ls, LocalSearch::Imp { .. });
        match self.algorithm {
            Algorithm::Ga => {
                if !(8..=30).contains(&self.population) {
                    return bad("population", format!("{} is outside [8, 30]", self.population));
                }
                if self.lambda < 1 || self.lambda > self.population {
                    return bad("lambda", format!("{} is outside [1, population]", self.lambda));
                }
                unit("mutation_prob", self.mutation_prob)?;
                if self.mutation == ShakeMode::Close && self.domain.is_none() {
                    return bad("mutation", "CLOSE mutation needs a domain model".into());
                }
            }
            Algorithm::Pso => {
                if !(8..=30).contains(&self.population) {
                    return bad("population", format!("{} is outside [8, 30]", self.population));
                }
                unit("omega", self.omega)?;
                unit("phi_p", self.phi_p)?;
                unit("phi_g", self.phi_g)?;
            }
            Algorithm::Ils => {
                if !(1..=20).contains(&self.npert) {
                    return bad("npert", format!("{} is outside [1, 20]", self.npert));
                }
            }
            Algorithm::Sa => {
                if !(1.0..=100.0).contains(&self.t0) {
                    return bad("t0", format!("{} is outside [1, 100]", self.t0));
                }
                if self.cooling == Cooling::Exp && !(self.cooling_opt > 0.0 && self.cooling_opt <= 1.0) {
                    return bad("cooling_opt", format!("{} is outside (0, 1]", self.cooling_opt));
                }
            }
            Algorithm::Vns => {
                if !(1..=50).contains(&self.kmax) {
                    return bad("kmax", format!("{} is outside [1, 50]", self.kmax));
                }
                if !(1..=100).contains(&self.big_k) {
                    return bad("K", format!("{} is outside [1, 100]", self.big_k));
                }
                unit("accept_prob", self.accept_prob)?;
            }
        }
        let trajectory = matches!(self.algorithm, Algorithm::Ils | Algorithm::Sa | Algorithm::Vns);
        if trajectory && self.shake == ShakeMode::Close && self.domain.is_none() {
            return bad("shake", "CLOSE shake needs a domain model".into());
        }
        if (uses_imp(&self.localsearch) || uses_imp(&self.localsearch2)) && self.domain.is_none() {
            return bad("localsearch", "IMP needs a domain model".into());
        }
        Ok(())
    }

    /// Render as `key=value` text that [`AlgorithmConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        line("algorithm", self.algorithm.to_string());
        line("iter", self.iter.to_string());
        line("time_budget", format!("{}", self.time_budget_s));
        line("seed", self.seed.to_string());
        line("generation", self.generation.to_string());
        if let Some((kind, d)) = self.domain {
            line("domain", kind.to_string());
            line("d", d.to_string());
        }
        for (key, laux, imp, ls) in [
            ("localsearch", "laux1", "impparam1", self.localsearch),
            ("localsearch2", "laux2", "impparam2", self.localsearch2),
        ] {
            line(key, ls.name().to_string());
            match ls {
                LocalSearch::Ialt { laux: l } => line(laux, l.to_string()),
                LocalSearch::Imp { imp_param } => line(imp, imp_param.to_string()),
                _ => {}
            }
        }
        line("shake", self.shake.to_string());
        line("npert", self.npert.to_string());
        line("next", self.next.to_string());
        line("t0", format!("{}", self.t0));
        line("cooling", self.cooling.to_string());
        line("cooling_opt", format!("{}", self.cooling_opt));
        line("kmax", self.kmax.to_string());
        line("K", self.big_k.to_string());
        line("accept", self.accept.to_string());
        line("accept_prob", format!("{}", self.accept_prob));
        line("population", self.population.to_string());
        line("lambda", self.lambda.to_string());
        line("selection", self.selection.to_string());
        line("crossover", self.crossover.to_string());
        line("mutation", self.mutation.to_string());
        line("mutation_prob", format!("{}", self.mutation_prob));
        line("replacement", self.replacement.to_string());
        line("omega", format!("{}", self.omega));
        line("phi_p", format!("{}", self.phi_p));
        line("phi_g", format!("{}", self.phi_g));
        s
    }
}

impl FromStr for AlgorithmConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "algorithm", "iter", "timebudget", "seed", "generation", "domain", "domainm", "d", "localsearch",
    "laux1", "laux", "impparam1", "impparam", "localsearch2", "laux2", "impparam2", "shake", "npert",
    "next", "t0", "cooling", "coolingopt", "kmax", "k", "accept", "acceptprob", "population", "lambda",
    "selection", "crossover", "mutation", "mutationprob", "mutprob", "replacement", "omega", "phip", "phig",
];

fn normalize_key(k: &str) -> String {
    let n: String = k
        .chars()
        .filter(|c| !matches!(c, '_' | '.' | ' ' | '-'))
        .collect::<String>()
        .to_ascii_lowercase();
    if n == "domainm" {
        "domain".into()
    } else {
        n
    }
}

fn value<V: FromStr>(key: &str, v: &str) -> Result<V> {
    v.parse::<V>().map_err(|_| Error::Config { key: key.into(), message: format!("invalid value `{v}`") })
}

fn local_search(
    raw: &BTreeMap<String, (String, String)>,
    key: &str,
    laux_keys: &[&str],
    imp_keys: &[&str],
) -> Result<LocalSearch> {
    let Some((orig, v)) = raw.get(key) else {
        return Ok(LocalSearch::None);
    };
    let param = |keys: &[&str], name: &str| -> Result<usize> {
        let (k, v) = keys
            .iter()
            .find_map(|k| raw.get(*k))
            .ok_or_else(|| Error::Config { key: orig.clone(), message: format!("{v} needs `{name}`") })?;
        value(k, v)
    };
    match v.to_ascii_uppercase().as_str() {
        "NONE" => Ok(LocalSearch::None),
        "FI" => Ok(LocalSearch::Fi),
        "IALT" => Ok(LocalSearch::Ialt { laux: param(laux_keys, laux_keys[0])? }),
        "IMP" => Ok(LocalSearch::Imp { imp_param: param(imp_keys, imp_keys[0])? }),
        _ => Err(Error::Config { key: orig.clone(), message: format!("unknown local search `{v}`") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_formulas() {
        assert_eq!(iteration_budget(IterBudget::Np5, 363, 23), 1669);
        assert_eq!(iteration_budget(IterBudget::N2_100, 363, 23), 726);
        assert_eq!(iteration_budget(IterBudget::N2_100, 10, 23), 100);
        assert_eq!(iteration_budget(IterBudget::P100, 363, 23), 2300);
        assert_eq!(iteration_budget(IterBudget::M1, 363, 23), 1_000_000);
    }

    #[test]
    fn presets_match_tuned_table() {
        let ga = AlgorithmConfig::preset(Algorithm::Ga);
        assert_eq!(ga.iter, IterBudget::Np5);
        assert_eq!(ga.domain, Some((DomainKind::Quad, 20)));
        assert_eq!((ga.population, ga.lambda), (14, 10));
        assert_eq!(ga.selection, Selection::Better);
        assert_eq!(ga.crossover, Crossover::CupCap);
        assert_eq!(ga.mutation, ShakeMode::Rand);
        assert_eq!(ga.mutation_prob, 0.91);
        assert_eq!(ga.replacement, Replacement::Comma);
        assert_eq!(ga.localsearch, LocalSearch::None);

        let ils = AlgorithmConfig::preset(Algorithm::Ils);
        assert_eq!(ils.iter, IterBudget::M1);
        assert_eq!(ils.localsearch, LocalSearch::Ialt { laux: 9 });
        assert_eq!(ils.domain, Some((DomainKind::Near, 29)));
        assert_eq!(ils.generation, Generation::Rand100);
        assert_eq!((ils.shake, ils.npert), (ShakeMode::Close, 6));

        let pso = AlgorithmConfig::preset(Algorithm::Pso);
        assert_eq!(pso.iter, IterBudget::N2_100);
        assert_eq!(pso.population, 29);
        assert_eq!((pso.omega, pso.phi_p, pso.phi_g), (0.0001, 0.53, 0.69));
        assert_eq!(pso.generation, Generation::Rand);

        let sa = AlgorithmConfig::preset(Algorithm::Sa);
        assert_eq!(sa.iter, IterBudget::N2_100);
        assert_eq!(sa.localsearch, LocalSearch::Ialt { laux: 16 });
        assert_eq!(sa.domain, Some((DomainKind::Quad, 34)));
        assert_eq!((sa.shake, sa.next, sa.cooling), (ShakeMode::Rand, NextMode::Seq, Cooling::Exp));
        assert_eq!((sa.t0, sa.cooling_opt), (4.45, 0.39));

        let vns = AlgorithmConfig::preset(Algorithm::Vns);
        assert_eq!(vns.iter, IterBudget::M1);
        assert_eq!(vns.localsearch, LocalSearch::Imp { imp_param: 2 });
        assert_eq!(vns.localsearch2, LocalSearch::Ialt { laux: 16 });
        assert_eq!(vns.domain, Some((DomainKind::Near, 49)));
        assert_eq!((vns.kmax, vns.big_k, vns.accept), (5, 57, Accept::Elitist));
        assert_eq!((vns.shake, vns.next), (ShakeMode::Close, NextMode::Seq));
    }

    #[test]
    fn text_round_trip() {
        for a in Algorithm::ALL {
            let c = AlgorithmConfig::preset(a);
            assert_eq!(AlgorithmConfig::parse(&c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = AlgorithmConfig::parse("algorithm=GA\npopulation=14\nfrobnicate=3\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "frobnicate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariants_enforced() {
        assert!(AlgorithmConfig::parse("algorithm=GA\npopulation=10\nlambda=11").is_err());
        assert!(AlgorithmConfig::parse("algorithm=ILS\nnpert=21").is_err());
        assert!(AlgorithmConfig::parse("algorithm=ILS\nshake=CLOSE").is_err());
        assert!(AlgorithmConfig::parse("algorithm=VNS\nlocalsearch=IMP\nimpparam1=2").is_err());
        assert!(AlgorithmConfig::parse("algorithm=SA\nlocalsearch=IALT").is_err());
        assert!(AlgorithmConfig::parse("algorithm=PSO\nomega=1.5").is_err());
        assert!(AlgorithmConfig::parse("population=14").is_err());
    }
}

//! JSON certificate files.
//!
//! Every big integer is a decimal string. Parsing is strict (no signs, no
//! leading zeros, no unknown fields) so that a document and the tree it
//! describes correspond one to one.

use std::collections::BTreeMap;
use std::fmt;

use qprime::{
    Certificate, CertificateKind, CostReport, Counters, EngineKind, Natural, PrimePower,
    WitnessMode, Witnesses,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub schema_version: String,
    pub target: String,
    pub tree: NodeDoc,
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_report: Option<CostReportDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub kind: KindDoc,
    pub target: String,
    /// `[prime, exponent]` pairs of `target - 1`.
    pub factorization: Vec<(String, u32)>,
    /// Theorem 1 nodes: the single base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    /// Theorem 2 nodes: prime -> base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<BTreeMap<String, String>>,
    pub children: Vec<NodeDoc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDoc {
    SmallPrime,
    Theorem1,
    Theorem2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    /// Kept as a string: a u64 does not survive every JSON reader.
    pub seed: String,
    pub engine: String,
    pub tool_version: String,
    pub theorem: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostReportDoc {
    pub target: String,
    pub p1_factorization: CountersDoc,
    pub p2_verification: CountersDoc,
    pub totals: CountersDoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountersDoc {
    pub modular_multiplications: u64,
    pub order_finding_invocations: u64,
    pub trial_divisions: u64,
    pub witness_trials: u64,
    pub factor_splits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentError(pub String);

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DocumentError {}

fn err<T>(msg: impl Into<String>) -> Result<T, DocumentError> {
    Err(DocumentError(msg.into()))
}

/// Strict decimal parse: ASCII digits only, no leading zeros.
pub fn parse_decimal(s: &str) -> Result<Natural, DocumentError> {
    let digits_only = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits_only || (s.len() > 1 && s.starts_with('0')) {
        return err(format!("{s:?} is not a canonical decimal integer"));
    }
    Natural::parse_bytes(s.as_bytes(), 10)
        .ok_or_else(|| DocumentError(format!("{s:?} is not a decimal integer")))
}

pub fn engine_name(engine: EngineKind) -> &'static str {
    match engine {
        EngineKind::StateVector => "sim",
        EngineKind::AnalyticSampling => "sample",
        EngineKind::ClassicalOracle => "oracle",
    }
}

impl NodeDoc {
    pub fn from_certificate(cert: &Certificate) -> Self {
        let (witness, witnesses) = match &cert.witnesses {
            Witnesses::None => (None, None),
            Witnesses::Single(a) => (Some(a.to_string()), None),
            Witnesses::PerPrime(map) => (
                None,
                Some(
                    map.iter()
                        .map(|(p, a)| (p.to_string(), a.to_string()))
                        .collect(),
                ),
            ),
        };
        NodeDoc {
            kind: match cert.kind {
                CertificateKind::SmallPrime => KindDoc::SmallPrime,
                CertificateKind::Theorem1 => KindDoc::Theorem1,
                CertificateKind::Theorem2 => KindDoc::Theorem2,
            },
            target: cert.target.to_string(),
            factorization: cert
                .factorization
                .iter()
                .map(|pp| (pp.prime.to_string(), pp.exponent))
                .collect(),
            witness,
            witnesses,
            children: cert.children.iter().map(NodeDoc::from_certificate).collect(),
        }
    }

    /// Rebuilds the tree without judging it; the verifier does that.
    pub fn to_certificate(&self) -> Result<Certificate, DocumentError> {
        let witnesses = match (&self.witness, &self.witnesses) {
            (None, None) => Witnesses::None,
            (Some(a), None) => Witnesses::Single(parse_decimal(a)?),
            (None, Some(map)) => {
                let mut out = BTreeMap::new();
                for (p, a) in map {
                    out.insert(parse_decimal(p)?, parse_decimal(a)?);
                }
                Witnesses::PerPrime(out)
            }
            (Some(_), Some(_)) => return err("node has both `witness` and `witnesses`"),
        };
        let factorization = self
            .factorization
            .iter()
            .map(|(p, e)| {
                Ok(PrimePower {
                    prime: parse_decimal(p)?,
                    exponent: *e,
                })
            })
            .collect::<Result<Vec<_>, DocumentError>>()?;
        Ok(Certificate {
            target: parse_decimal(&self.target)?,
            kind: match self.kind {
                KindDoc::SmallPrime => CertificateKind::SmallPrime,
                KindDoc::Theorem1 => CertificateKind::Theorem1,
                KindDoc::Theorem2 => CertificateKind::Theorem2,
            },
            factorization,
            witnesses,
            children: self
                .children
                .iter()
                .map(NodeDoc::to_certificate)
                .collect::<Result<_, _>>()?,
        })
    }
}

impl From<Counters> for CountersDoc {
    fn from(c: Counters) -> Self {
        CountersDoc {
            modular_multiplications: c.modular_multiplications,
            order_finding_invocations: c.order_finding_invocations,
            trial_divisions: c.trial_divisions,
            witness_trials: c.witness_trials,
            factor_splits: c.factor_splits,
        }
    }
}

impl From<CountersDoc> for Counters {
    fn from(c: CountersDoc) -> Self {
        Counters {
            modular_multiplications: c.modular_multiplications,
            order_finding_invocations: c.order_finding_invocations,
            trial_divisions: c.trial_divisions,
            witness_trials: c.witness_trials,
            factor_splits: c.factor_splits,
        }
    }
}

impl CostReportDoc {
    pub fn from_report(r: &CostReport) -> Self {
        CostReportDoc {
            target: r.target.to_string(),
            p1_factorization: r.p1_factorization.into(),
            p2_verification: r.p2_verification.into(),
            totals: r.totals.into(),
        }
    }

    pub fn to_report(&self) -> Result<CostReport, DocumentError> {
        Ok(CostReport {
            target: parse_decimal(&self.target)?,
            p1_factorization: self.p1_factorization.into(),
            p2_verification: self.p2_verification.into(),
            totals: self.totals.into(),
        })
    }
}

impl CertificateDocument {
    pub fn new(
        cert: &Certificate,
        seed: u64,
        engine: EngineKind,
        mode: WitnessMode,
        report: Option<&CostReport>,
    ) -> Self {
        CertificateDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            target: cert.target.to_string(),
            tree: NodeDoc::from_certificate(cert),
            metadata: Metadata {
                seed: seed.to_string(),
                engine: engine_name(engine).to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                theorem: match mode {
                    WitnessMode::Theorem1 => 1,
                    WitnessMode::Theorem2 => 2,
                },
            },
            cost_report: report.map(CostReportDoc::from_report),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialization cannot fail")
    }

    /// Parses and checks the envelope; the proof itself is left to the
    /// verifier.
    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: CertificateDocument =
            serde_json::from_str(text).map_err(|e| DocumentError(format!("not a certificate document: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return err(format!("unsupported schema version {:?}", doc.schema_version));
        }
        if doc.target != doc.tree.target {
            return err(format!(
                "document target {} differs from tree target {}",
                doc.target, doc.tree.target
            ));
        }
        parse_decimal(&doc.metadata.seed)?;
        if let Some(r) = &doc.cost_report {
            r.to_report()?;
        }
        Ok(doc)
    }

    pub fn certificate(&self) -> Result<Certificate, DocumentError> {
        self.tree.to_certificate()
    }
}

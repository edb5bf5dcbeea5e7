//! Benchmark problems: decoding chromosomes into phenotypes and scoring them.

use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::genome::{Chromosome, GeneCodec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `sum(x_i^2)/4000 + prod(cos(x_i/sqrt(i))) + 1`, with the plus sign on the product.
    GriewankAsPrinted,
    /// The usual Griewank function, `sum(x_i^2)/4000 - prod(cos(x_i/sqrt(i))) + 1`.
    GriewankStandard,
    /// Number of set bits.
    Onemax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

impl ObjectiveSense {
    /// True when `candidate` is strictly better than `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            ObjectiveSense::Minimize => candidate < incumbent,
            ObjectiveSense::Maximize => candidate > incumbent,
        }
    }

    /// Orders fitness values best-first.
    pub fn cmp_best_first(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            ObjectiveSense::Minimize => a.total_cmp(&b),
            ObjectiveSense::Maximize => b.total_cmp(&a),
        }
    }

    pub fn best(self, a: f64, b: f64) -> f64 {
        if self.improves(b, a) {
            b
        } else {
            a
        }
    }
}

impl ProblemKind {
    pub fn sense(self) -> ObjectiveSense {
        match self {
            ProblemKind::GriewankAsPrinted | ProblemKind::GriewankStandard => ObjectiveSense::Minimize,
            ProblemKind::Onemax => ObjectiveSense::Maximize,
        }
    }
}

/// A problem instance: which function, how many genes, and how genes decode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem")]
pub struct ProblemSpec {
    kind: ProblemKind,
    dimensions: usize,
    codec: GeneCodec,
    objective_sense: ObjectiveSense,
}

#[derive(Deserialize)]
struct RawProblem {
    kind: ProblemKind,
    dimensions: usize,
    codec: Option<GeneCodec>,
    objective_sense: Option<ObjectiveSense>,
}

impl TryFrom<RawProblem> for ProblemSpec {
    type Error = EvoError;

    fn try_from(raw: RawProblem) -> Result<Self> {
        let codec = match raw.codec {
            Some(codec) => codec,
            None => default_codec(raw.kind),
        };
        let spec = ProblemSpec::new(raw.kind, raw.dimensions, codec)?;
        if let Some(sense) = raw.objective_sense {
            if sense != spec.objective_sense {
                return Err(EvoError::config(format!(
                    "{:?} requires objective_sense {:?}",
                    raw.kind, spec.objective_sense
                )));
            }
        }
        Ok(spec)
    }
}

fn default_codec(kind: ProblemKind) -> GeneCodec {
    match kind {
        ProblemKind::Onemax => GeneCodec::new(1, 0.0, 1.0).expect("valid codec"),
        _ => GeneCodec::griewank(),
    }
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, dimensions: usize, codec: GeneCodec) -> Result<Self> {
        if dimensions == 0 {
            return Err(EvoError::config("dimensions must be at least 1"));
        }
        Ok(ProblemSpec {
            kind,
            dimensions,
            codec,
            objective_sense: kind.sense(),
        })
    }

    /// Standard Griewank over `[-511, 512]^dimensions` with 20-bit genes.
    pub fn griewank(dimensions: usize) -> Result<Self> {
        ProblemSpec::new(ProblemKind::GriewankStandard, dimensions, GeneCodec::griewank())
    }

    pub fn griewank_as_printed(dimensions: usize) -> Result<Self> {
        ProblemSpec::new(ProblemKind::GriewankAsPrinted, dimensions, GeneCodec::griewank())
    }

    /// OneMax over `bits` one-bit genes.
    pub fn onemax(bits: usize) -> Result<Self> {
        ProblemSpec::new(ProblemKind::Onemax, bits, default_codec(ProblemKind::Onemax))
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dimensions(&self) -> usize {
        self.dimensions
    }

    pub fn codec(&self) -> &GeneCodec {
        &self.codec
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.objective_sense
    }

    pub fn chromosome_len(&self) -> usize {
        self.dimensions * self.codec.bits_per_gene() as usize
    }

    fn check_len(&self, chromosome: &Chromosome) -> Result<()> {
        if chromosome.len() != self.chromosome_len() {
            return Err(EvoError::encoding(format!(
                "chromosome has {} bits, problem expects {} ({} genes x {} bits)",
                chromosome.len(),
                self.chromosome_len(),
                self.dimensions,
                self.codec.bits_per_gene()
            )));
        }
        Ok(())
    }

    /// Decodes gene `i` from bits `[i*bpg, (i+1)*bpg)`.
    pub fn decode(&self, chromosome: &Chromosome) -> Result<Vec<f64>> {
        self.check_len(chromosome)?;
        let width = self.codec.bits_per_gene() as usize;
        (0..self.dimensions)
            .map(|i| self.codec.decode(chromosome.read_code(i * width, width)?))
            .collect()
    }

    pub fn evaluate(&self, chromosome: &Chromosome) -> Result<f64> {
        let fitness = match self.kind {
            ProblemKind::Onemax => {
                self.check_len(chromosome)?;
                chromosome.count_ones() as f64
            }
            ProblemKind::GriewankStandard => griewank(&self.decode(chromosome)?),
            ProblemKind::GriewankAsPrinted => griewank_as_printed(&self.decode(chromosome)?),
        };
        if !fitness.is_finite() {
            return Err(EvoError::encoding(format!("non-finite fitness {fitness}")));
        }
        Ok(fitness)
    }
}

fn griewank_terms(x: &[f64]) -> (f64, f64) {
    x.iter()
        .enumerate()
        .fold((0.0, 1.0), |(sum, prod), (i, &xi)| {
            (sum + xi * xi / 4000.0, prod * (xi / ((i + 1) as f64).sqrt()).cos())
        })
}

/// Griewank function. Global minimum `f(0, ..., 0) = 0`.
pub fn griewank(x: &[f64]) -> f64 {
    let (sum, prod) = griewank_terms(x);
    sum - prod + 1.0
}

/// Griewank with the cosine product added instead of subtracted; `f(0, ..., 0) = 2`.
pub fn griewank_as_printed(x: &[f64]) -> f64 {
    let (sum, prod) = griewank_terms(x);
    sum + prod + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        let zero = vec![0.0; 10];
        assert_eq!(griewank(&zero), 0.0);
        assert_eq!(griewank_as_printed(&zero), 2.0);
    }

    #[test]
    fn decode_extremes() {
        let spec = ProblemSpec::griewank(10).unwrap();
        assert_eq!(spec.decode(&Chromosome::zeros(200)).unwrap(), vec![-511.0; 10]);
        assert_eq!(spec.decode(&Chromosome::ones(200)).unwrap(), vec![512.0; 10]);
    }

    #[test]
    fn single_gene_uses_msb_first() {
        let spec = ProblemSpec::griewank(1).unwrap();
        let c: Chromosome = "10000000000000000000".parse().unwrap();
        let x = spec.decode(&c).unwrap();
        assert_eq!(x, vec![GeneCodec::griewank().decode(524_288).unwrap()]);
    }

    #[test]
    fn length_mismatch_is_encoding_error() {
        let spec = ProblemSpec::griewank(10).unwrap();
        assert!(matches!(
            spec.evaluate(&Chromosome::zeros(199)),
            Err(EvoError::Encoding(_))
        ));
        let onemax = ProblemSpec::onemax(8).unwrap();
        assert!(onemax.evaluate(&Chromosome::zeros(9)).is_err());
    }

    #[test]
    fn onemax_counts_bits() {
        let spec = ProblemSpec::onemax(8).unwrap();
        assert_eq!(spec.evaluate(&Chromosome::ones(8)).unwrap(), 8.0);
        assert_eq!(spec.evaluate(&"10100000".parse().unwrap()).unwrap(), 2.0);
        assert_eq!(spec.sense(), ObjectiveSense::Maximize);
    }

    #[test]
    fn sense_is_fixed_by_kind() {
        let ok: ProblemSpec = serde_json::from_str(
            r#"{"kind":"griewank_standard","dimensions":10,"objective_sense":"minimize"}"#,
        )
        .unwrap();
        assert_eq!(ok, ProblemSpec::griewank(10).unwrap());
        let bad = serde_json::from_str::<ProblemSpec>(
            r#"{"kind":"onemax","dimensions":10,"objective_sense":"minimize"}"#,
        );
        assert!(bad.is_err());
        assert!(ProblemSpec::griewank(0).is_err());
    }
}

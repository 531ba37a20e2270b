//! Heisenberg spin chains: Hamiltonian MPOs, their commutator (Liouville)
//! lifts, control and augmented operators, and pure product states.
//!
//! A density matrix `ρ` on `d` spins is stored as a TT with one mode of size 4
//! per site, the fused index being `q = 2·i + j` for row `i` and column `j` of
//! that site. The lifted generator `Ĥ̂` acts as `vec(Hρ − ρH)` in this layout.

use crate::linalg::{ONE, ZERO};
use crate::tt::{Block3, Block4, TruncationPolicy, TtOperator, TtVector};
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Tolerance used to recompress exactly assembled operators.
const OPERATOR_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlAxis {
    X,
    Y,
    Z,
}

impl ControlAxis {
    /// Row-major 2×2 Pauli matrix.
    pub fn pauli(self) -> [C64; 4] {
        match self {
            ControlAxis::X => [ZERO, ONE, ONE, ZERO],
            ControlAxis::Y => [ZERO, -I, I, ZERO],
            ControlAxis::Z => [ONE, ZERO, ZERO, -ONE],
        }
    }
}

impl std::str::FromStr for ControlAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(ControlAxis::X),
            "y" => Ok(ControlAxis::Y),
            "z" => Ok(ControlAxis::Z),
            other => Err(Error::InvalidArgument(format!("unknown Pauli axis {other:?}"))),
        }
    }
}

impl std::fmt::Display for ControlAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControlAxis::X => "x",
            ControlAxis::Y => "y",
            ControlAxis::Z => "z",
        })
    }
}

/// A single-site control term `σ_axis` on `site` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControlSpec {
    pub site: usize,
    pub axis: ControlAxis,
}

/// Uniform nearest-neighbour chain `Σ_k Jx σx σx + Jy σy σy + Jz σz σz`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinChainSpec {
    pub sites: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub controls: Vec<ControlSpec>,
}

impl SpinChainSpec {
    /// Isotropic chain with one `σz` control on the first spin.
    pub fn xxx(sites: usize, j: f64) -> Self {
        Self { sites, jx: j, jy: j, jz: j, controls: vec![ControlSpec { site: 1, axis: ControlAxis::Z }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidArgument(format!("a chain needs at least 2 sites, got {}", self.sites)));
        }
        if self.controls.is_empty() {
            return Err(Error::InvalidArgument("at least one control operator is required".into()));
        }
        for c in &self.controls {
            if c.site == 0 || c.site > self.sites {
                return Err(Error::InvalidArgument(format!("control site {} outside 1..={}", c.site, self.sites)));
            }
        }
        if ![self.jx, self.jy, self.jz].iter().all(|j| j.is_finite()) {
            return Err(Error::InvalidArgument("couplings must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductStateSpec {
    pub spins: Vec<Spin>,
}

impl ProductStateSpec {
    /// `|↓…↓↑↓…↓⟩` with the up spin at `site` (1-based).
    pub fn single_up(sites: usize, site: usize) -> Self {
        Self { spins: (1..=sites).map(|k| if k == site { Spin::Up } else { Spin::Down }).collect() }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }
}

fn identity2() -> [C64; 4] {
    [ONE, ZERO, ZERO, ONE]
}

/// Heisenberg Hamiltonian as an MPO on modes of size 2. Zero couplings are
/// dropped, so the interior rank is `2 + #{nonzero J}` (at most 5).
pub fn build_hamiltonian_mpo(spec: &SpinChainSpec) -> Result<TtOperator> {
    if spec.sites < 2 {
        return Err(Error::InvalidArgument(format!("a chain needs at least 2 sites, got {}", spec.sites)));
    }
    let terms: Vec<(f64, [C64; 4])> = [(spec.jx, ControlAxis::X), (spec.jy, ControlAxis::Y), (spec.jz, ControlAxis::Z)]
        .into_iter()
        .filter(|(j, _)| *j != 0.0)
        .map(|(j, a)| (j, a.pauli()))
        .collect();
    let d = spec.sites;
    if terms.is_empty() {
        return TtOperator::new((0..d).map(|_| Block4::zeros(1, 2, 2, 1)).collect());
    }
    let r = terms.len() + 2;
    let last = r - 1;
    // W[α, β] as 2×2 operators: row 0 starts, row `last` has finished.
    let w = |alpha: usize, beta: usize| -> Option<[C64; 4]> {
        if (alpha == 0 && beta == 0) || (alpha == last && beta == last) {
            Some(identity2())
        } else if alpha == 0 && (1..last).contains(&beta) {
            let (j, p) = terms[beta - 1];
            Some(p.map(|z| z * j))
        } else if beta == last && (1..last).contains(&alpha) {
            Some(terms[alpha - 1].1)
        } else {
            None
        }
    };
    let mut blocks = Vec::with_capacity(d);
    for k in 0..d {
        let rows: Vec<usize> = if k == 0 { vec![0] } else { (0..r).collect() };
        let cols: Vec<usize> = if k + 1 == d { vec![last] } else { (0..r).collect() };
        let blk = Block4::from_fn(rows.len(), 2, 2, cols.len(), |a, i, j, b| {
            w(rows[a], cols[b]).map_or(ZERO, |m| m[2 * i + j])
        });
        blocks.push(blk);
    }
    TtOperator::new(blocks)
}

/// Commutator lift `ρ ↦ Hρ − ρH` on fused site modes of size 4.
pub fn lift_superoperator(h: &TtOperator) -> Result<TtOperator> {
    if h.row_sizes().iter().chain(h.col_sizes().iter()).any(|&n| n != 2) {
        return Err(Error::ShapeMismatch("lifting expects a spin-1/2 operator".into()));
    }
    let left = h.blocks().iter().map(|b| {
        let (ra, _, _, rb) = b.shape();
        Block4::from_fn(ra, 4, 4, rb, |a, p, q, c| {
            let (i, j, ip, jp) = (p / 2, p % 2, q / 2, q % 2);
            if j == jp {
                b.get(a, i, ip, c)
            } else {
                ZERO
            }
        })
    });
    let right = h.blocks().iter().map(|b| {
        let (ra, _, _, rb) = b.shape();
        Block4::from_fn(ra, 4, 4, rb, |a, p, q, c| {
            let (i, j, ip, jp) = (p / 2, p % 2, q / 2, q % 2);
            if i == ip {
                b.get(a, jp, j, c)
            } else {
                ZERO
            }
        })
    });
    let l1 = TtOperator::new(left.collect())?;
    let l2 = TtOperator::new(right.collect())?;
    let sum = TtOperator::add_scaled(-ONE, &l2, &l1)?;
    Ok(round_operator(&sum))
}

fn round_operator(op: &TtOperator) -> TtOperator {
    let policy = TruncationPolicy::new(OPERATOR_TOLERANCE).expect("valid tolerance");
    op.round(&policy)
}

fn single_site_operator(sites: usize, site: usize, m: [C64; 4]) -> Result<TtOperator> {
    let factors: Vec<(usize, Vec<C64>)> =
        (1..=sites).map(|k| (2, if k == site { m.to_vec() } else { identity2().to_vec() })).collect();
    TtOperator::product(&factors)
}

/// One lifted control superoperator per control descriptor.
pub fn build_control_superoperators(spec: &SpinChainSpec) -> Result<Vec<TtOperator>> {
    spec.controls
        .iter()
        .map(|c| {
            if c.site == 0 || c.site > spec.sites {
                return Err(Error::InvalidArgument(format!("control site {} outside 1..={}", c.site, spec.sites)));
            }
            lift_superoperator(&single_site_operator(spec.sites, c.site, c.axis.pauli())?)
        })
        .collect()
}

/// Coupled state/sensitivity generator on a leading mode of size `K + 1`.
///
/// Index `K` of the leading mode carries the state `ρ`, indices `0..K` the
/// sensitivities `∂ρ/∂c_k`. The operator is `I ⊗ Ĥ̂ + Σ_k E_{k,K} ⊗ Ĥ̂_k`, which
/// for one control is the block matrix `[[Ĥ̂, Ĥ̂_1], [0, Ĥ̂]]`.
pub fn build_augmented_operator(hsup: &TtOperator, controls: &[TtOperator]) -> Result<TtOperator> {
    let k = controls.len();
    let n = k + 1;
    let mut acc = TtOperator::identity(&[n]).kron(hsup);
    for (c, hk) in controls.iter().enumerate() {
        if hk.row_sizes() != hsup.row_sizes() || hk.col_sizes() != hsup.col_sizes() {
            return Err(Error::ShapeMismatch(format!("control {c} acts on different modes than the drift")));
        }
        let mut e = vec![ZERO; n * n];
        e[c * n + k] = ONE;
        let coupling = TtOperator::product(&[(n, e)])?.kron(hk);
        acc = acc.add(&coupling)?;
    }
    Ok(round_operator(&acc))
}

/// `vec(|ψ⟩⟨ψ|)` for a product state; all ranks are 1.
pub fn build_pure_density_tt(spec: &ProductStateSpec) -> Result<TtVector> {
    if spec.spins.is_empty() {
        return Err(Error::InvalidArgument("empty product state".into()));
    }
    let factors: Vec<Vec<C64>> = spec
        .spins
        .iter()
        .map(|s| match s {
            Spin::Up => vec![ONE, ZERO, ZERO, ZERO],
            Spin::Down => vec![ZERO, ZERO, ZERO, ONE],
        })
        .collect();
    Ok(TtVector::product(&factors))
}

/// `Tr ρ`, a rank-one functional.
pub fn trace(rho: &TtVector) -> Result<C64> {
    let w = TtVector::product(&vec![vec![ONE, ZERO, ZERO, ONE]; rho.ndim()]);
    w.dot(rho)
}

/// `ρ†` by swapping the fused index `2i + j ↔ 2j + i` and conjugating.
pub fn hermitian_conjugate(rho: &TtVector) -> Result<TtVector> {
    rho.map_blocks(|_, b| {
        let (l, n, r) = b.shape();
        Block3::from_fn(l, n, r, |a, q, c| {
            let swapped = 2 * (q % 2) + q / 2;
            b.get(a, swapped, c).conj()
        })
    })
}

/// Drift and control superoperators of a chain.
#[derive(Clone, Debug)]
pub struct SpinModel {
    pub drift: TtOperator,
    pub controls: Vec<TtOperator>,
}

impl SpinModel {
    pub fn from_spec(spec: &SpinChainSpec) -> Result<Self> {
        spec.validate()?;
        let drift = lift_superoperator(&build_hamiltonian_mpo(spec)?)?;
        let controls = build_control_superoperators(spec)?;
        Ok(Self { drift, controls })
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.drift.col_sizes()
    }

    /// `Ĥ̂_0 + Σ_k c_k Ĥ̂_k` for one interval.
    pub fn generator(&self, amplitudes: &[f64]) -> Result<TtOperator> {
        if amplitudes.len() != self.controls.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for {} controls",
                amplitudes.len(),
                self.controls.len()
            )));
        }
        let mut acc = self.drift.clone();
        for (c, hk) in amplitudes.iter().zip(&self.controls) {
            if *c != 0.0 {
                acc = TtOperator::add_scaled(C64::new(*c, 0.0), hk, &acc)?;
            }
        }
        Ok(round_operator(&acc))
    }

    /// Coupled state/sensitivity generator for one interval.
    pub fn augmented_generator(&self, amplitudes: &[f64]) -> Result<TtOperator> {
        build_augmented_operator(&self.generator(amplitudes)?, &self.controls)
    }
}

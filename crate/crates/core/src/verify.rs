//! Pauli strings, stabilizer groups and exact stabilizer certification.
//!
//! Qubit `q` of an `n`-qubit register is bit `n − 1 − q` of the basis index,
//! matching the Kronecker ordering of [`crate::quantum`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::{
    CMatrix, CVector, DensityMatrix, QuantumState, StateVector, C64, I, ONE, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn phases(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn matrix(self) -> CMatrix {
        let m = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, I, -I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        // column-major
        CMatrix::from_column_slice(2, 2, &m)
    }

    /// `self · other = i^k · result`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A signed tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
    negative: bool,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, negative: bool) -> Self {
        Self { letters, negative }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n], false)
    }

    /// Identity everywhere except the listed `(qubit, letter)` pairs.
    pub fn from_sparse(n: usize, entries: &[(usize, Pauli)]) -> Self {
        let mut letters = vec![Pauli::I; n];
        for &(q, p) in entries {
            letters[q] = p;
        }
        Self::new(letters, false)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        let anti = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    /// Product `self · other`. Fails when the result carries a phase of ±i,
    /// i.e. when the factors anticommute.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut k = 0u8;
        let letters = self
            .letters
            .iter()
            .zip(&other.letters)
            .map(|(&a, &b)| {
                let (dk, p) = a.mul(b);
                k += dk;
                p
            })
            .collect();
        if k % 2 == 1 {
            return Err(Error::InvalidArgument(format!(
                "{self} and {other} anticommute; product is not Hermitian"
            )));
        }
        let negative = self.negative ^ other.negative ^ (k % 4 == 2);
        Ok(PauliString { letters, negative })
    }

    fn x_mask(&self) -> usize {
        self.mask(Pauli::flips)
    }

    fn z_mask(&self) -> usize {
        self.mask(Pauli::phases)
    }

    fn mask(&self, f: fn(Pauli) -> bool) -> usize {
        let n = self.len();
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| f(p))
            .fold(0, |m, (q, _)| m | 1 << (n - 1 - q))
    }

    /// `P|b⟩ = phase(b) |b ⊕ x⟩`; returns `(x, phase table helper)`.
    fn action(&self) -> (usize, usize, C64) {
        let ny = self.letters.iter().filter(|&&p| p == Pauli::Y).count();
        let base = I.powu(ny as u32) * self.sign();
        (self.x_mask(), self.z_mask(), base)
    }

    /// Dense matrix; intended for small registers.
    pub fn matrix(&self) -> CMatrix {
        let mut m = CMatrix::identity(1, 1);
        for p in &self.letters {
            m = m.kronecker(&p.matrix());
        }
        m * C64::from(self.sign())
    }
}

#[inline]
fn phase_at(b: usize, zmask: usize, base: C64) -> C64 {
    if (b & zmask).count_ones() % 2 == 1 {
        -base
    } else {
        base
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional leading sign followed by letters from `IXYZ`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negative, body) = match s.chars().next() {
            Some('-') => (true, &s[1..]),
            Some('+') => (false, &s[1..]),
            _ => (false, s),
        };
        let letters = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!(
                    "bad Pauli letter {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        Ok(PauliString { letters, negative })
    }
}

/// Commuting generators together with one destabilizer per generator:
/// destabilizer `i` anticommutes with generator `i` only.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerGroup {
    generators: Vec<PauliString>,
    destabilizers: Vec<PauliString>,
}

impl StabilizerGroup {
    pub fn new(generators: Vec<PauliString>, destabilizers: Vec<PauliString>) -> Result<Self> {
        let n = generators.first().map(PauliString::len).unwrap_or(0);
        if n == 0 || generators.len() != n {
            return Err(Error::InvalidArgument(format!(
                "need {n} generators on {n} qubits, got {}",
                generators.len()
            )));
        }
        if destabilizers.len() != n {
            return Err(Error::InvalidArgument(
                "one destabilizer per generator".into(),
            ));
        }
        for g in generators.iter().chain(&destabilizers) {
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: g.len(),
                });
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for (j, b) in generators.iter().enumerate().skip(i + 1) {
                if !a.commutes(b) {
                    return Err(Error::InvalidArgument(format!(
                        "generators {i} ({a}) and {j} ({b}) anticommute"
                    )));
                }
            }
            for (j, d) in destabilizers.iter().enumerate() {
                if a.commutes(d) == (i == j) {
                    return Err(Error::InvalidArgument(format!(
                        "destabilizer {j} ({d}) has the wrong commutation with generator {i} ({a})"
                    )));
                }
            }
        }
        Ok(Self {
            generators,
            destabilizers,
        })
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn destabilizers(&self) -> &[PauliString] {
        &self.destabilizers
    }

    pub fn n_qubits(&self) -> usize {
        self.generators.len()
    }

    /// Pauli string that flips exactly the generators marked `true`.
    pub fn correction(&self, flipped: &[bool]) -> Result<PauliString> {
        if flipped.len() != self.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits(),
                found: flipped.len(),
            });
        }
        let mut out = PauliString::identity(self.n_qubits());
        for (d, _) in self.destabilizers.iter().zip(flipped).filter(|(_, &f)| f) {
            // destabilizers here are X/Z-type products that mutually commute
            let unsigned = PauliString::new(d.letters.clone(), false);
            out = out.multiply(&unsigned)?;
        }
        out.negative = false;
        Ok(out)
    }
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(what.into()))
    }
}

/// `{X⊗n} ∪ {Z_i Z_{i+1}}`.
pub fn ghz_stabilizers(n: usize) -> Result<StabilizerGroup> {
    require(n >= 2, "GHZ stabilizers need n >= 2")?;
    let mut gens = vec![PauliString::new(vec![Pauli::X; n], false)];
    let mut destab = vec![PauliString::from_sparse(n, &[(0, Pauli::Z)])];
    for i in 0..n - 1 {
        gens.push(PauliString::from_sparse(
            n,
            &[(i, Pauli::Z), (i + 1, Pauli::Z)],
        ));
        let tail: Vec<_> = (i + 1..n).map(|q| (q, Pauli::X)).collect();
        destab.push(PauliString::from_sparse(n, &tail));
    }
    StabilizerGroup::new(gens, destab)
}

/// Graph-state generators `X_a Π_{b ~ a} Z_b`.
pub fn graph_stabilizers(n: usize, edges: &[(usize, usize)]) -> Result<StabilizerGroup> {
    require(n >= 1, "graph needs at least one vertex")?;
    for &(a, b) in edges {
        require(
            a < n && b < n && a != b,
            "edge endpoints must be distinct vertices",
        )?;
    }
    let gens = (0..n)
        .map(|a| {
            let mut entries = vec![(a, Pauli::X)];
            for &(u, v) in edges {
                if u == a {
                    entries.push((v, Pauli::Z));
                } else if v == a {
                    entries.push((u, Pauli::Z));
                }
            }
            PauliString::from_sparse(n, &entries)
        })
        .collect();
    let destab = (0..n)
        .map(|a| PauliString::from_sparse(n, &[(a, Pauli::Z)]))
        .collect();
    StabilizerGroup::new(gens, destab)
}

pub fn path_edges(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

/// `K_i = Z_{i−1} X_i Z_{i+1}`, truncated at the ends.
pub fn cluster_stabilizers(n: usize) -> Result<StabilizerGroup> {
    require(n >= 2, "cluster stabilizers need n >= 2")?;
    graph_stabilizers(n, &path_edges(n))
}

// Canonical target states. The protocol's correction table maps every
// measurement outcome onto exactly these vectors.

/// `(|0…0⟩ + |1…1⟩)/√2`; for `n = 1` this is `|+⟩`.
pub fn ghz_state(n: usize) -> StateVector {
    let dim = 1usize << n;
    let mut amps = CVector::zeros(dim);
    let a = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    amps[0] = a;
    amps[dim - 1] = a;
    StateVector::new(amps, vec![2; n]).expect("normalized by construction")
}

/// `Π_{(a,b)} CZ_ab |+⟩^⊗n`.
pub fn graph_state(n: usize, edges: &[(usize, usize)]) -> StateVector {
    let dim = 1usize << n;
    let norm = (dim as f64).sqrt().recip();
    let bit = |b: usize, q: usize| (b >> (n - 1 - q)) & 1;
    let amps = CVector::from_iterator(
        dim,
        (0..dim).map(|b| {
            let parity = edges
                .iter()
                .map(|&(u, v)| bit(b, u) & bit(b, v))
                .sum::<usize>();
            C64::from(if parity % 2 == 0 { norm } else { -norm })
        }),
    );
    StateVector::new(amps, vec![2; n]).expect("normalized by construction")
}

pub fn cluster_state(n: usize) -> StateVector {
    graph_state(n, &path_edges(n))
}

fn qubit_register(dims: &[usize], n: usize) -> Result<()> {
    if dims.len() != n || dims.iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: dims.iter().product(),
        });
    }
    Ok(())
}

/// Exact `⟨P⟩`, normalized by the state's weight.
pub fn expectation(state: &QuantumState, p: &PauliString) -> Result<f64> {
    qubit_register(state.dims(), p.len())?;
    let (x, z, base) = p.action();
    let (num, den) = match state {
        QuantumState::Pure(s) => {
            let a = s.amplitudes();
            let mut acc = ZERO;
            for b in 0..a.len() {
                acc += a[b ^ x].conj() * phase_at(b, z, base) * a[b];
            }
            (acc.re, s.norm_sqr())
        }
        QuantumState::Mixed(r) => {
            // tr(Pρ) = Σ_c phase(c) ρ[c, c⊕x]
            let m = r.matrix();
            let mut acc = ZERO;
            for c in 0..m.nrows() {
                acc += phase_at(c, z, base) * m[(c, c ^ x)];
            }
            (acc.re, r.trace())
        }
    };
    if den <= 0.0 {
        return Err(Error::ZeroProbabilityOutcome {
            outcome: "empty state",
        });
    }
    Ok((num / den).clamp(-1.0, 1.0))
}

/// `|ψ⟩ → P|ψ⟩` or `ρ → PρP`.
pub fn apply_pauli(state: &QuantumState, p: &PauliString) -> Result<QuantumState> {
    qubit_register(state.dims(), p.len())?;
    let (x, z, base) = p.action();
    Ok(match state {
        QuantumState::Pure(s) => {
            let a = s.amplitudes();
            let mut out = CVector::zeros(a.len());
            for b in 0..a.len() {
                out[b ^ x] = phase_at(b, z, base) * a[b];
            }
            StateVector::new(out, s.dims().to_vec())?.into()
        }
        QuantumState::Mixed(r) => {
            let m = r.matrix();
            let d = m.nrows();
            let mut out = CMatrix::zeros(d, d);
            for c in 0..d {
                let pc = phase_at(c, z, base);
                for b in 0..d {
                    out[(b ^ x, c ^ x)] = pc.conj() * phase_at(b, z, base) * m[(b, c)];
                }
            }
            DensityMatrix::new(out, r.dims().to_vec())?.into()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub generators: Vec<PauliString>,
    pub expectations: Vec<f64>,
    pub min_expectation: f64,
    /// `1 − Σ(1 − ⟨K_i⟩)/2`, clamped to `[0, 1]`.
    pub fidelity_bound: f64,
}

impl CertificationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("generator,expectation\n");
        for (g, e) in self.generators.iter().zip(&self.expectations) {
            s.push_str(&format!("{g},{e:.16e}\n"));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "generators={} min_expectation={:.12} fidelity_bound={:.12}",
            self.generators.len(),
            self.min_expectation,
            self.fidelity_bound
        )
    }
}

pub fn certify(state: &QuantumState, group: &StabilizerGroup) -> Result<CertificationReport> {
    let expectations = group
        .generators()
        .par_iter()
        .map(|g| expectation(state, g))
        .collect::<Result<Vec<_>>>()?;
    let min_expectation = expectations.iter().copied().fold(f64::INFINITY, f64::min);
    let deficit: f64 = expectations.iter().map(|e| (1.0 - e) / 2.0).sum();
    Ok(CertificationReport {
        generators: group.generators().to_vec(),
        expectations,
        min_expectation,
        fidelity_bound: (1.0 - deficit).clamp(0.0, 1.0),
    })
}

//! Fibers of the parametrization: index shifts, rescaling and singular parameters.

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conv::{Architecture, Filter};
use crate::error::{Error, Result};
use crate::param::{symbolic_network, WeightTuple};
use crate::poly::Coeff;

/// Default tolerance for projective comparison of network coefficients.
pub const PROJECTIVE_TOL: f64 = 1e-8;

/// Per-layer shift. Positive `t_i` consumes leading zeros of filter `i`
/// (entries slide towards index 0), negative `t_i` consumes trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShiftVector(pub Vec<i64>);

impl ShiftVector {
    pub fn zero(layers: usize) -> Self {
        ShiftVector(vec![0; layers])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&t| t == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroProfile {
    pub leading: Vec<usize>,
    pub trailing: Vec<usize>,
}

impl ZeroProfile {
    pub fn of<T: Coeff>(w: &WeightTuple<T>) -> Self {
        ZeroProfile {
            leading: w.filters.iter().map(|f| f.leading_zeros()).collect(),
            trailing: w.filters.iter().map(|f| f.trailing_zeros()).collect(),
        }
    }

    fn allows(&self, t: &ShiftVector) -> bool {
        t.0.len() == self.leading.len()
            && t.0.iter().enumerate().all(|(i, &ti)| {
                if ti >= 0 {
                    ti as usize <= self.leading[i]
                } else {
                    ti.unsigned_abs() as usize <= self.trailing[i]
                }
            })
    }
}

/// Stride compatibility: `t̃_i = t_i + t̃_{i-1}/s_{i-1}` stays integral and `t̃_{L-1} = 0`.
pub fn shift_is_compatible(arch: &Architecture, t: &ShiftVector) -> bool {
    if t.0.len() != arch.layers() {
        return false;
    }
    let mut acc = Ratio::<i64>::from_integer(0);
    for (i, &ti) in t.0.iter().enumerate() {
        let carried = if i == 0 {
            Ratio::from_integer(0)
        } else {
            acc / arch.s[i - 1] as i64
        };
        acc = carried + ti;
        if !acc.is_integer() {
            return false;
        }
    }
    acc == Ratio::from_integer(0)
}

/// All stride-compatible shifts fitting within the zero profile, the zero shift first.
pub fn admissible_shifts(arch: &Architecture, profile: &ZeroProfile) -> Vec<ShiftVector> {
    let l = arch.layers();
    let lo: Vec<i64> = profile.trailing.iter().map(|&z| -(z as i64)).collect();
    let hi: Vec<i64> = profile.leading.iter().map(|&z| z as i64).collect();
    let mut out = vec![ShiftVector::zero(l)];
    if l == 0 {
        return out;
    }
    let mut t = lo.clone();
    loop {
        let cand = ShiftVector(t.clone());
        if !cand.is_zero() && shift_is_compatible(arch, &cand) {
            out.push(cand);
        }
        let mut j = 0;
        loop {
            if j == l {
                return out;
            }
            if t[j] < hi[j] {
                t[j] += 1;
                break;
            }
            t[j] = lo[j];
            j += 1;
        }
    }
}

/// Slide each filter by its shift, filling with zeros.
pub fn apply_shift<T: Coeff>(arch: &Architecture, w: &WeightTuple<T>, t: &ShiftVector) -> Result<WeightTuple<T>> {
    w.check(arch)?;
    if !shift_is_compatible(arch, t) {
        return Err(Error::InadmissibleShift(format!("{:?} violates the stride recursion", t.0)));
    }
    if !ZeroProfile::of(w).allows(t) {
        return Err(Error::InadmissibleShift(format!("{:?} would drop nonzero entries", t.0)));
    }
    let filters = w
        .filters
        .iter()
        .zip(&t.0)
        .map(|(f, &ti)| {
            let k = f.len() as i64;
            Filter(
                (0..k)
                    .map(|j| {
                        let src = j + ti;
                        if (0..k).contains(&src) {
                            f.0[src as usize].clone()
                        } else {
                            T::zero()
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(WeightTuple { filters })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Comparison {
    /// Coefficient-wise equality.
    Exact,
    /// Equality of the unit-normalized coefficient vectors up to sign.
    Projective { tol: f64 },
}

/// Whether two weight tuples parametrize the same network.
pub fn same_function<T: Coeff>(arch: &Architecture, w: &WeightTuple<T>, v: &WeightTuple<T>, mode: Comparison) -> Result<bool> {
    let a = symbolic_network(arch, w)?.sym_coords();
    let b = symbolic_network(arch, v)?.sym_coords();
    Ok(match mode {
        Comparison::Exact => a == b,
        Comparison::Projective { tol } => {
            let a: Vec<f64> = a.iter().map(Coeff::to_f64).collect();
            let b: Vec<f64> = b.iter().map(Coeff::to_f64).collect();
            projective_distance(&a, &b) < tol
        }
    })
}

/// `min(‖â − b̂‖, ‖â + b̂‖)` for unit vectors; zero vectors are only close to each other.
pub fn projective_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let (mut minus, mut plus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        minus += (u - v) * (u - v);
        plus += (u + v) * (u + v);
    }
    minus.min(plus).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalWeights {
    pub weights: WeightTuple<f64>,
    /// Signed scale `c_i` removed from filter `i < L-1`.
    pub scales: Vec<f64>,
    /// `Π c_i^{r^{L-1-i}}`, multiplied into the last filter.
    pub global: f64,
}

impl CanonicalWeights {
    /// Undo the normalization.
    pub fn reconstruct(&self) -> WeightTuple<f64> {
        let l = self.weights.layers();
        let filters = self
            .weights
            .filters
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let c = if i + 1 < l { self.scales[i] } else { 1.0 / self.global };
                Filter(f.0.iter().map(|x| x * c).collect())
            })
            .collect();
        WeightTuple { filters }
    }
}

/// Normalize filters `0..L-1` to unit norm with positive leading entry and push
/// the compensating factor into the last filter. The network is unchanged.
pub fn canonical_form(arch: &Architecture, w: &WeightTuple<f64>) -> Result<CanonicalWeights> {
    w.check(arch)?;
    if let Some(layer) = w.first_zero_filter() {
        return Err(Error::ZeroFilter { layer });
    }
    let l = arch.layers();
    let mut filters = w.filters.clone();
    let mut scales = Vec::with_capacity(l.saturating_sub(1));
    let mut global = 1.0;
    for (i, f) in filters.iter_mut().take(l - 1).enumerate() {
        let norm = f.0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lead = f.0[f.leading_zeros()];
        let mut c = norm.copysign(lead);
        // keep already-normalized filters bit-identical
        if (c - 1.0).abs() <= 4.0 * f64::EPSILON {
            c = 1.0;
        }
        if c != 1.0 {
            f.0.iter_mut().for_each(|x| *x /= c);
        }
        global *= c.powi(arch.r.pow((l - 1 - i) as u32) as i32);
        scales.push(c);
    }
    if global != 1.0 {
        filters[l - 1].0.iter_mut().for_each(|x| *x *= global);
    }
    Ok(CanonicalWeights {
        weights: WeightTuple { filters },
        scales,
        global,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Singularity {
    Smooth,
    NodalSingular,
    ConeVertex,
}

/// Classify a parameter point by its image: the origin, a point with a
/// non-trivial shift fiber, or a smooth point.
pub fn is_singular_parameter<T: Coeff>(arch: &Architecture, w: &WeightTuple<T>) -> Result<Singularity> {
    w.check(arch)?;
    if w.first_zero_filter().is_some() {
        return Ok(Singularity::ConeVertex);
    }
    let shifts = admissible_shifts(arch, &ZeroProfile::of(w));
    Ok(if shifts.len() > 1 {
        Singularity::NodalSingular
    } else {
        Singularity::Smooth
    })
}

/// Integer-valued tuple with random zero padding that admits a nonzero shift
/// whenever the architecture allows one within `attempts` draws.
pub fn padded_sample<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R, attempts: usize) -> WeightTuple<f64> {
    let mut last = None;
    for _ in 0..attempts.max(1) {
        let filters: Vec<Filter<f64>> = arch
            .k
            .iter()
            .map(|&k| {
                let zeros = rng.random_range(0..k);
                let lead = rng.random_range(0..=zeros);
                Filter(
                    (0..k)
                        .map(|j| {
                            if j < lead || j >= k - (zeros - lead) {
                                0.0
                            } else {
                                let v: i32 = rng.random_range(1..=9);
                                if rng.random_bool(0.5) {
                                    v as f64
                                } else {
                                    -v as f64
                                }
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        let w = WeightTuple { filters };
        if admissible_shifts(arch, &ZeroProfile::of(&w)).len() > 1 {
            return w;
        }
        last = Some(w);
    }
    last.expect("at least one draw")
}

//! P1 finite element assembly on tagged triangulations of the unit square.
//!
//! The discretization carries the bilinear form a(u,v) = grad u . grad v,
//! the L2 inner products over the domain and over the boundary pieces
//! Gamma2, Gamma3, and the constrained subspaces: V0 zeroes the Gamma1
//! trace, K0 additionally zeroes Gamma3. Constants of the continuous
//! problem (coercivity m_a, continuity M_a, trace norm) are estimated from
//! generalized eigenvalue problems on the free V0 degrees of freedom; the
//! values are discrete estimates and converge from one side as the mesh is
//! refined.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh2D};
use crate::sparse::{cg, CsrMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a nodal coefficient vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    State,
    Control,
    Adjoint,
    Target,
    Flux,
}

/// P1 coefficient vector, one value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub role: FieldRole,
}

impl Field {
    pub fn new(values: Vec<f64>, role: FieldRole) -> Self {
        Field { values, role }
    }

    pub fn zeros(n: usize, role: FieldRole) -> Self {
        Field { values: vec![0.0; n], role }
    }

    pub fn constant(n: usize, c: f64, role: FieldRole) -> Self {
        Field { values: vec![c; n], role }
    }

    /// Nodal interpolant of an analytic function.
    pub fn from_fn(mesh: &Mesh2D, role: FieldRole, f: impl Fn(f64, f64) -> f64) -> Self {
        Field { values: mesh.vertices.iter().map(|v| f(v[0], v[1])).collect(), role }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Assembled discrete operators and constraint index sets for one mesh.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub dof_count: usize,
    /// A[i][j] = integral of grad phi_i . grad phi_j over the domain.
    pub stiffness: CsrMatrix,
    /// L2(Omega) mass matrix.
    pub mass_domain: CsrMatrix,
    /// Line-integral mass matrices on the tagged boundary pieces.
    pub mass_gamma2: CsrMatrix,
    pub mass_gamma3: CsrMatrix,
    /// Constrained dof sets; Gamma1 takes priority over Gamma3 at corners.
    pub dirichlet_g1: Vec<usize>,
    pub dirichlet_g3: Vec<usize>,
    /// Complement of dirichlet_g1.
    pub free_dofs_v0: Vec<usize>,
    /// Complement of dirichlet_g1 united with dirichlet_g3.
    pub free_dofs_k0: Vec<usize>,
    pub mesh: Mesh2D,
    gamma3_nodes: Vec<usize>,
    gamma3_weights: Vec<f64>,
}

impl FemSystem {
    /// Sorted vertex indices lying on Gamma3.
    pub fn gamma3_nodes(&self) -> &[usize] {
        &self.gamma3_nodes
    }

    /// Lumped Gamma3 quadrature weights (row sums of mass_gamma3), aligned
    /// with `gamma3_nodes`. They sum to the length of Gamma3.
    pub fn gamma3_lumped_weights(&self) -> &[f64] {
        &self.gamma3_weights
    }
}

pub fn assemble(mesh: &Mesh2D) -> Result<FemSystem> {
    let n = mesh.n_vertices();
    let mut stiff = Vec::with_capacity(9 * mesh.n_triangles());
    let mut mass = Vec::with_capacity(9 * mesh.n_triangles());

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "triangle {t} has non-positive area {area}"
            )));
        }
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.vertices[v]).collect();
        // grad of barycentric i: ((y_j - y_k), (x_k - x_j)) / (2 area)
        let bx = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let by = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        for i in 0..3 {
            for k in 0..3 {
                let kij = (bx[i] * bx[k] + by[i] * by[k]) / (4.0 * area);
                stiff.push((tri[i], tri[k], kij));
                let mij = area / 12.0 * if i == k { 2.0 } else { 1.0 };
                mass.push((tri[i], tri[k], mij));
            }
        }
    }

    let mut bmass2 = Vec::new();
    let mut bmass3 = Vec::new();
    for e in &mesh.boundary_edges {
        let dest = match e.tag {
            BoundaryTag::Gamma1 => continue,
            BoundaryTag::Gamma2 => &mut bmass2,
            BoundaryTag::Gamma3 => &mut bmass3,
        };
        let a = mesh.vertices[e.v[0]];
        let b = mesh.vertices[e.v[1]];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        for i in 0..2 {
            for k in 0..2 {
                let m = len / 6.0 * if i == k { 2.0 } else { 1.0 };
                dest.push((e.v[i], e.v[k], m));
            }
        }
    }

    for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3] {
        if mesh.tagged_vertices(tag).is_empty() {
            return Err(Error::EmptyBoundaryTag(tag));
        }
    }

    let dirichlet_g1 = mesh.tagged_vertices(BoundaryTag::Gamma1);
    let gamma3_nodes = mesh.tagged_vertices(BoundaryTag::Gamma3);
    // Gamma1 wins where the closures of the pieces meet
    let dirichlet_g3: Vec<usize> = gamma3_nodes
        .iter()
        .copied()
        .filter(|v| dirichlet_g1.binary_search(v).is_err())
        .collect();

    let constrained_v0: Vec<bool> = {
        let mut m = vec![false; n];
        for &i in &dirichlet_g1 {
            m[i] = true;
        }
        m
    };
    let free_dofs_v0: Vec<usize> = (0..n).filter(|&i| !constrained_v0[i]).collect();
    let free_dofs_k0: Vec<usize> = (0..n)
        .filter(|&i| !constrained_v0[i] && dirichlet_g3.binary_search(&i).is_err())
        .collect();

    let mass_gamma3 = CsrMatrix::from_triplets(n, n, &bmass3);
    let gamma3_row_sums = mass_gamma3.row_sums();
    let gamma3_weights: Vec<f64> = gamma3_nodes.iter().map(|&i| gamma3_row_sums[i]).collect();

    Ok(FemSystem {
        dof_count: n,
        stiffness: CsrMatrix::from_triplets(n, n, &stiff),
        mass_domain: CsrMatrix::from_triplets(n, n, &mass),
        mass_gamma2: CsrMatrix::from_triplets(n, n, &bmass2),
        mass_gamma3,
        dirichlet_g1,
        dirichlet_g3,
        free_dofs_v0,
        free_dofs_k0,
        mesh: mesh.clone(),
        gamma3_nodes,
        gamma3_weights,
    })
}

/// Right-hand side of the weak form: mass_domain * g - mass_gamma2 * q.
pub fn load_vector(sys: &FemSystem, g: &Field, q: &Field) -> Result<Vec<f64>> {
    for f in [g, q] {
        if f.len() != sys.dof_count {
            return Err(Error::DimensionMismatch { expected: sys.dof_count, got: f.len() });
        }
    }
    let mut l = sys.mass_domain.apply(&g.values);
    let bq = sys.mass_gamma2.apply(&q.values);
    for (li, bi) in l.iter_mut().zip(&bq) {
        *li -= bi;
    }
    Ok(l)
}

/// Which discrete inner product a norm is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// L2 over the domain.
    H,
    /// Full H1: (L2^2 + seminorm^2)^(1/2).
    V,
    /// H1 seminorm (gradient only).
    V0,
    /// L2 over Gamma2.
    Q,
    /// L2 over Gamma3.
    L2Gamma3,
}

pub fn norm(sys: &FemSystem, f: &Field, which: NormKind) -> f64 {
    assert_eq!(f.len(), sys.dof_count, "field sized to dof_count");
    let v = &f.values;
    let q = match which {
        NormKind::H => sys.mass_domain.quadratic_form(v, v),
        NormKind::V => {
            sys.mass_domain.quadratic_form(v, v) + sys.stiffness.quadratic_form(v, v)
        }
        NormKind::V0 => sys.stiffness.quadratic_form(v, v),
        NormKind::Q => sys.mass_gamma2.quadratic_form(v, v),
        NormKind::L2Gamma3 => sys.mass_gamma3.quadratic_form(v, v),
    };
    q.max(0.0).sqrt()
}

/// Controls for the power-iteration eigenvalue estimates.
#[derive(Debug, Clone, Copy)]
pub struct EigenOpts {
    /// Relative change of the Rayleigh quotient below which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub seed: u64,
}

impl Default for EigenOpts {
    fn default() -> Self {
        EigenOpts { tol: 1e-8, max_iters: 2000, cg_tol: 1e-12, cg_max_iters: 20_000, seed: 7 }
    }
}

fn seeded_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Power iteration for the largest lambda of  num x = lambda den x,
/// advancing x <- den^{-1} num x; `den` must be SPD.
fn generalized_power(
    num: &CsrMatrix,
    den: &CsrMatrix,
    opts: &EigenOpts,
) -> Result<f64> {
    let n = num.nrows();
    let mut x = seeded_start(n, opts.seed);
    let mut lambda = 0.0;
    let mut stable = 0;
    for it in 0..opts.max_iters {
        let z = num.apply(&x);
        let (y, out) = cg(den, &z, Some(&x), opts.cg_tol, opts.cg_max_iters);
        if !out.converged {
            return Err(Error::LinearSolveFailed {
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        let scale = den.quadratic_form(&y, &y).sqrt();
        if scale == 0.0 {
            // numerator annihilated the iterate; restart off a shifted seed
            x = seeded_start(n, opts.seed.wrapping_add(it as u64 + 1));
            continue;
        }
        x = y.iter().map(|v| v / scale).collect();
        let next = num.quadratic_form(&x, &x) / den.quadratic_form(&x, &x);
        // three consecutive sub-tolerance changes guard against stopping on
        // a transient plateau before the dominant mode has emerged
        if (next - lambda).abs() <= opts.tol * next.abs().max(1e-300) {
            stable += 1;
            if stable >= 3 {
                return Ok(next);
            }
        } else {
            stable = 0;
        }
        lambda = next;
    }
    Err(Error::EigenIterationFailed { iterations: opts.max_iters })
}

/// Discrete coercivity and continuity constants of a on V0: the extreme
/// generalized eigenvalues of (stiffness, stiffness + mass) over free V0
/// dofs, so that m_a |v|_V^2 <= a(v,v) <= M_a |v|_V^2.
///
/// Both are obtained through the equivalent pencil A x = mu M x and the
/// monotone map lambda = mu / (1 + mu): the extreme eigenvalues of (A, A+M)
/// sit in clusters of relative width O(h^2) where power iteration stalls,
/// while the corresponding mu are separated by a few percent, and the map
/// contracts whatever error remains in mu.
pub fn estimate_coercivity(sys: &FemSystem) -> Result<(f64, f64)> {
    estimate_coercivity_with(sys, &EigenOpts::default())
}

pub fn estimate_coercivity_with(sys: &FemSystem, opts: &EigenOpts) -> Result<(f64, f64)> {
    let a = sys.stiffness.restrict(&sys.free_dofs_v0);
    let m = sys.mass_domain.restrict(&sys.free_dofs_v0);
    // smallest mu of (A, M) by inverse power iteration, largest directly
    let mu_min = 1.0 / generalized_power(&m, &a, opts)?;
    let mu_max = generalized_power(&a, &m, opts)?;
    Ok((mu_min / (1.0 + mu_min), mu_max / (1.0 + mu_max)))
}

/// Discrete trace-operator norm: sup over V0 of |v|_{L2(Gamma3)} / |v|_V,
/// the square root of the largest generalized eigenvalue of
/// (mass_gamma3, stiffness + mass) on free V0 dofs.
pub fn estimate_trace_norm(sys: &FemSystem) -> Result<f64> {
    estimate_trace_norm_with(sys, &EigenOpts::default())
}

pub fn estimate_trace_norm_with(sys: &FemSystem, opts: &EigenOpts) -> Result<f64> {
    let g3 = sys.mass_gamma3.restrict(&sys.free_dofs_v0);
    let a = sys.stiffness.restrict(&sys.free_dofs_v0);
    let m = sys.mass_domain.restrict(&sys.free_dofs_v0);
    let b = a.add(&m);
    Ok(generalized_power(&g3, &b, opts)?.max(0.0).sqrt())
}

/// True discretization errors of a P1 field against an analytic solution.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    /// (l2^2 + h1_semi^2)^(1/2).
    pub v: f64,
}

/// Degree-4 triangle quadrature: barycentric coordinate, weight pairs.
const QUAD6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const W2: f64 = 0.109951743655322;
    [
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([1.0 - 2.0 * A2, A2, A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
    ]
};

/// L2 and gradient errors of `u` against an exact solution, integrated with
/// a quadrature exact to degree 4 (so the measured rates are not polluted
/// by nodal superconvergence).
pub fn error_norms(
    sys: &FemSystem,
    u: &Field,
    exact: impl Fn(f64, f64) -> f64,
    exact_grad: impl Fn(f64, f64) -> (f64, f64),
) -> ErrorNorms {
    assert_eq!(u.len(), sys.dof_count, "field sized to dof_count");
    let mesh = &sys.mesh;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.vertices[v]).collect();
        let uv = [u.values[tri[0]], u.values[tri[1]], u.values[tri[2]]];
        let bx = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let by = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        let uhx = (0..3).map(|i| uv[i] * bx[i]).sum::<f64>() / (2.0 * area);
        let uhy = (0..3).map(|i| uv[i] * by[i]).sum::<f64>() / (2.0 * area);
        for (lam, w) in QUAD6 {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            let uh = lam[0] * uv[0] + lam[1] * uv[1] + lam[2] * uv[2];
            let diff = uh - exact(x, y);
            let (gx, gy) = exact_grad(x, y);
            l2 += w * area * diff * diff;
            h1 += w * area * ((uhx - gx).powi(2) + (uhy - gy).powi(2));
        }
    }
    ErrorNorms { l2: l2.sqrt(), h1_semi: h1.sqrt(), v: (l2 + h1).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_unit_square, BoundaryEdge, TaggingScheme};
    use approx::assert_abs_diff_eq;

    fn unit_sys(n: usize) -> FemSystem {
        assemble(&generate_unit_square(n, TaggingScheme::default()).unwrap()).unwrap()
    }

    /// Single unit right triangle with one edge per tag.
    fn reference_triangle() -> Mesh2D {
        Mesh2D {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![
                BoundaryEdge { v: [0, 1], tag: BoundaryTag::Gamma2 },
                BoundaryEdge { v: [1, 2], tag: BoundaryTag::Gamma3 },
                BoundaryEdge { v: [2, 0], tag: BoundaryTag::Gamma1 },
            ],
            h: 2f64.sqrt(),
        }
    }

    #[test]
    fn reference_element_stiffness_matches_closed_form() {
        let sys = assemble(&reference_triangle()).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(sys.stiffness.get(i, k), expect[i][k], epsilon = 1e-14);
            }
        }
        // element mass = area/12 * [[2,1,1],[1,2,1],[1,1,2]]
        assert_abs_diff_eq!(sys.mass_domain.get(0, 0), 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.mass_domain.get(0, 1), 1.0 / 24.0, epsilon = 1e-15);
    }

    #[test]
    fn stiffness_rows_annihilate_constants() {
        let sys = unit_sys(2);
        for s in sys.stiffness.row_sums() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn mass_totals_are_measures_of_their_sets() {
        let sys = unit_sys(2);
        assert_abs_diff_eq!(sys.mass_domain.total_sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.mass_gamma3.total_sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.mass_gamma2.total_sum(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matrices_are_symmetric() {
        let sys = unit_sys(4);
        for m in [&sys.stiffness, &sys.mass_domain, &sys.mass_gamma2, &sys.mass_gamma3] {
            assert!(m.max_asymmetry() < 1e-14);
        }
    }

    #[test]
    fn constraint_sets_partition_with_gamma1_priority() {
        let sys = unit_sys(4);
        assert_eq!(sys.dirichlet_g1.len(), 5);
        assert_eq!(sys.dirichlet_g3.len(), 5);
        assert_eq!(sys.free_dofs_v0.len(), 20);
        assert_eq!(sys.free_dofs_k0.len(), 15);
        for v in &sys.dirichlet_g3 {
            assert!(sys.dirichlet_g1.binary_search(v).is_err());
        }
        // lumped weights: h/2 at corners, h inside, total = |Gamma3| = 1
        let w = sys.gamma3_lumped_weights();
        assert_eq!(w.len(), 5);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(w[0], 0.125, epsilon = 1e-13);
        assert_abs_diff_eq!(w[2], 0.25, epsilon = 1e-13);
    }

    #[test]
    fn empty_tag_class_is_rejected() {
        let all_flux = TaggingScheme {
            left: BoundaryTag::Gamma2,
            right: BoundaryTag::Gamma2,
            bottom: BoundaryTag::Gamma2,
            top: BoundaryTag::Gamma2,
        };
        let mesh = generate_unit_square(2, all_flux).unwrap();
        match assemble(&mesh) {
            Err(Error::EmptyBoundaryTag(tag)) => assert_eq!(tag, BoundaryTag::Gamma1),
            other => panic!("expected empty-tag error, got {other:?}"),
        }
    }

    #[test]
    fn load_vector_examples() {
        let sys = unit_sys(2);
        let zero = Field::zeros(sys.dof_count, FieldRole::Control);
        let zflux = Field::zeros(sys.dof_count, FieldRole::Flux);
        let l = load_vector(&sys, &zero, &zflux).unwrap();
        assert!(l.iter().all(|&v| v == 0.0));

        let one = Field::constant(sys.dof_count, 1.0, FieldRole::Control);
        let l = load_vector(&sys, &one, &zflux).unwrap();
        assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

        let qone = Field::constant(sys.dof_count, 1.0, FieldRole::Flux);
        let l = load_vector(&sys, &zero, &qone).unwrap();
        assert_abs_diff_eq!(l.iter().sum::<f64>(), -2.0, epsilon = 1e-12);

        let short = Field::zeros(3, FieldRole::Control);
        assert!(matches!(
            load_vector(&sys, &short, &zflux),
            Err(Error::DimensionMismatch { expected: 9, got: 3 })
        ));
    }

    #[test]
    fn norm_examples() {
        let sys = unit_sys(4);
        let one = Field::constant(sys.dof_count, 1.0, FieldRole::State);
        assert_abs_diff_eq!(norm(&sys, &one, NormKind::H), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm(&sys, &one, NormKind::V0), 0.0, epsilon = 1e-12);

        let x = Field::from_fn(&sys.mesh, FieldRole::State, |x, _| x);
        assert_abs_diff_eq!(norm(&sys, &x, NormKind::V0), 1.0, epsilon = 1e-12);
        // integral of x^2 over the square is 1/3; x is in the P1 space so exact
        assert_abs_diff_eq!(norm(&sys, &x, NormKind::H), (1f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(norm(&sys, &x, NormKind::V), (4f64 / 3.0).sqrt(), epsilon = 1e-12);
        // trace x = 1 on Gamma3, and |Gamma3| = 1
        assert_abs_diff_eq!(norm(&sys, &x, NormKind::L2Gamma3), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coercivity_estimates_bracket_the_form() {
        let sys = unit_sys(8);
        let (m_a, big) = estimate_coercivity(&sys).unwrap();
        assert!(m_a > 0.0 && m_a < 1.0, "m_a = {m_a}");
        assert!(big <= 1.0 + 1e-10, "M_a = {big}");
        // Rayleigh quotients of random V0 fields must fall inside [m_a, M_a]
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut v = vec![0.0; sys.dof_count];
            for &i in &sys.free_dofs_v0 {
                v[i] = rng.gen_range(-1.0..1.0);
            }
            let num = sys.stiffness.quadratic_form(&v, &v);
            let den = num + sys.mass_domain.quadratic_form(&v, &v);
            let q = num / den;
            assert!(q >= m_a - 1e-8 && q <= big + 1e-8, "q = {q} outside [{m_a}, {big}]");
        }
    }

    #[test]
    fn coercivity_estimates_match_frozen_dense_values() {
        // reference eigenvalues of (A, A+M) on free V0 dofs, n = 8, computed
        // once with a dense generalized eigensolver and frozen here
        let (m_a, big) = estimate_coercivity(&unit_sys(8)).unwrap();
        assert_abs_diff_eq!(m_a, 0.7121489270, epsilon = 1e-6);
        assert_abs_diff_eq!(big, 0.9995615125, epsilon = 1e-6);
    }

    #[test]
    fn coercivity_estimate_is_mesh_stable() {
        let (a8, _) = estimate_coercivity(&unit_sys(8)).unwrap();
        let (a16, _) = estimate_coercivity(&unit_sys(16)).unwrap();
        assert!((a8 - a16).abs() <= 0.2 * a8, "m_a jumped: {a8} vs {a16}");
    }

    #[test]
    fn trace_norm_estimate_is_positive_bounded_and_stable() {
        let g8 = estimate_trace_norm(&unit_sys(8)).unwrap();
        let g16 = estimate_trace_norm(&unit_sys(16)).unwrap();
        assert!(g8 > 0.0 && g8 < 10.0);
        assert!((g8 - g16).abs() <= 0.2 * g8, "trace norm jumped: {g8} vs {g16}");
    }

    // Dense generalized eigensolver used as an independent oracle below.
    fn dense_of(m: &CsrMatrix, keep: &[usize]) -> Vec<Vec<f64>> {
        let r = m.restrict(keep);
        let n = keep.len();
        let mut d = vec![vec![0.0; n]; n];
        for (i, j, v) in r.iter_entries() {
            d[i][j] = v;
        }
        d
    }

    fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    l[i][j] = (a[i][i] - s).sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        l
    }

    fn forward_solve_cols(l: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = l.len();
        let mut x = vec![vec![0.0; n]; n];
        for c in 0..n {
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[i][k] * x[k][c]).sum();
                x[i][c] = (b[i][c] - s) / l[i][i];
            }
        }
        x
    }

    fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
    }

    fn jacobi_max_eigenvalue(mut c: Vec<Vec<f64>>) -> f64 {
        let n = c.len();
        for _ in 0..200 {
            let mut p = 0;
            let mut q = 1;
            let mut big = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if c[i][j].abs() > big {
                        big = c[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if big < 1e-13 {
                break;
            }
            let theta = 0.5 * (c[q][q] - c[p][p]) / c[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let cs = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * cs;
            for k in 0..n {
                let (ckp, ckq) = (c[k][p], c[k][q]);
                c[k][p] = cs * ckp - sn * ckq;
                c[k][q] = sn * ckp + cs * ckq;
            }
            for k in 0..n {
                let (cpk, cqk) = (c[p][k], c[q][k]);
                c[p][k] = cs * cpk - sn * cqk;
                c[q][k] = sn * cpk + cs * cqk;
            }
        }
        (0..n).map(|i| c[i][i]).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn trace_norm_matches_dense_oracle_on_coarse_mesh() {
        let sys = unit_sys(4);
        let keep = &sys.free_dofs_v0;
        let g3 = dense_of(&sys.mass_gamma3, keep);
        let a = dense_of(&sys.stiffness, keep);
        let m = dense_of(&sys.mass_domain, keep);
        let n = keep.len();
        let b: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| a[i][j] + m[i][j]).collect()).collect();
        // largest eig of (G3, B) = largest eig of L^-1 G3 L^-T with B = L L^T
        let l = cholesky(&b);
        let y = forward_solve_cols(&l, &g3);
        let c = transpose(&forward_solve_cols(&l, &transpose(&y)));
        let oracle = jacobi_max_eigenvalue(c).max(0.0).sqrt();
        let estimate = estimate_trace_norm(&sys).unwrap();
        assert_abs_diff_eq!(estimate, oracle, epsilon = 1e-6 * (1.0 + oracle));
    }

    #[test]
    fn error_norms_vanish_for_reproduced_linear_solution() {
        let sys = unit_sys(4);
        let u = Field::from_fn(&sys.mesh, FieldRole::State, |x, _| x);
        let e = error_norms(&sys, &u, |x, _| x, |_, _| (1.0, 0.0));
        assert!(e.l2 < 1e-14 && e.h1_semi < 1e-14 && e.v < 1e-14);
    }

    #[test]
    fn error_norms_track_interpolation_error_order() {
        // against a genuinely curved function the interpolant error is O(h^2) in L2
        let f = |x: f64, y: f64| (x * x + 0.5 * y * y * y).sin();
        let fg = |x: f64, y: f64| {
            let c = (x * x + 0.5 * y * y * y).cos();
            (2.0 * x * c, 1.5 * y * y * c)
        };
        let mut prev = f64::NAN;
        for n in [8, 16] {
            let sys = unit_sys(n);
            let u = Field::from_fn(&sys.mesh, FieldRole::State, f);
            let e = error_norms(&sys, &u, f, fg);
            if !prev.is_nan() {
                let ratio = prev / e.l2;
                assert!((3.2..4.8).contains(&ratio), "interpolant L2 ratio {ratio}");
            }
            prev = e.l2;
        }
    }
}

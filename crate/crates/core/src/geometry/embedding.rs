use nalgebra::{DMatrix, DVector};

use super::{ManifoldBackend, ManifoldKind, Point};

/// Extrinsic data of the embedding `S^m ⊂ R^{m+1}` at a node, for one tangent
/// direction `v`. Tori are embedded flat and report zeros.
#[derive(Debug, Clone)]
pub struct EmbeddingData {
    /// Outward unit normal (the node itself on spheres).
    pub normal: DVector<f64>,
    /// `B(v, v)`.
    pub b_vv: DVector<f64>,
    /// Shape operator `A^ν` of the unit normal as an ambient matrix.
    pub shape_operator: DMatrix<f64>,
    /// `f(x) = max |B(u, u)|²` over unit tangent `u`.
    pub f_max: f64,
    /// `θ(v) = Σ_a |B(v, v_a)|²` over an orthonormal tangent basis.
    pub theta: f64,
}

impl ManifoldBackend {
    /// Second fundamental form `B(X, Y) = (D_X Y)^⊥`.
    pub fn second_fundamental_form(
        &self,
        p: &Point,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => {
                let (x, y) = (self.tangentialize(p, x), self.tangentialize(p, y));
                p * (-x.dot(&y))
            }
            ManifoldKind::Torus => DVector::zeros(self.ambient_dim()),
        }
    }

    /// Shape operator `A^V(X) = -(D_X V)^⊤` for a normal vector `V`.
    pub fn shape_operator(&self, p: &Point, v: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => {
                // V = c·p extends as c·(position); D_X V = c X
                let c = v.dot(p);
                self.tangentialize(p, x) * (-c)
            }
            ManifoldKind::Torus => DVector::zeros(self.ambient_dim()),
        }
    }

    pub fn embedding_data_at(&self, node: usize, v: &DVector<f64>) -> EmbeddingData {
        let p = &self.nodes[node];
        let n = self.ambient_dim();
        match self.kind {
            ManifoldKind::Sphere => {
                let vt = self.tangentialize(p, v);
                let frame = self.frame_at(p);
                let theta = frame
                    .vectors
                    .iter()
                    .map(|e| self.second_fundamental_form(p, &vt, e).norm_squared())
                    .sum();
                let proj = DMatrix::identity(n, n) - p * p.transpose();
                EmbeddingData {
                    normal: p.clone(),
                    b_vv: self.second_fundamental_form(p, &vt, &vt),
                    shape_operator: -proj,
                    f_max: 1.0,
                    theta,
                }
            }
            ManifoldKind::Torus => EmbeddingData {
                normal: DVector::zeros(n),
                b_vv: DVector::zeros(n),
                shape_operator: DMatrix::zeros(n, n),
                f_max: 0.0,
                theta: 0.0,
            },
        }
    }
}

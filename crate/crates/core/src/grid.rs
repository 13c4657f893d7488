//! Uniform grid functions with exterior extension.

use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::domain::DomainSpec;
use crate::error::{invalid, Result};
use crate::point::Point;

pub type Exterior1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Values at the interior nodes a + (i+1)h, i = 0..n, h = (b−a)/(n+1), of a
/// function on (a, b), with a callable extension outside the interval.
#[derive(Clone)]
pub struct GridFunction1D {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
    pub exterior: Exterior1D,
}

impl fmt::Debug for GridFunction1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction1D")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("n", &self.values.len())
            .finish()
    }
}

impl Serialize for GridFunction1D {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GridFunction1D", 4)?;
        st.serialize_field("a", &self.a)?;
        st.serialize_field("b", &self.b)?;
        st.serialize_field("x", &self.nodes())?;
        st.serialize_field("u", &self.values)?;
        st.end()
    }
}

impl GridFunction1D {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if !(a < b) {
            return Err(invalid("grid interval requires a < b"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        Ok(GridFunction1D {
            a,
            b,
            values,
            exterior: Arc::new(|_| 0.0),
        })
    }

    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (b - a) / (n + 1) as f64;
        GridFunction1D::new(a, b, (0..n).map(|i| f(a + (i + 1) as f64 * h)).collect())
    }

    pub fn with_exterior(mut self, g: Exterior1D) -> Self {
        self.exterior = g;
        self
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.values.len() + 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.node(i)).collect()
    }

    /// Piecewise-linear interpolant inside, exterior data outside; the
    /// endpoints take the exterior values.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return (self.exterior)(x);
        }
        let h = self.h();
        let s = (x - self.a) / h;
        let j = (s.floor() as usize).min(self.n());
        let t = s - j as f64;
        let left = self.value_at_index(j as isize - 1);
        let right = self.value_at_index(j as isize);
        left + t * (right - left)
    }

    /// Value at node index `i` with indices −1 and n mapped to the endpoints.
    pub fn value_at_index(&self, i: isize) -> f64 {
        if i < 0 {
            (self.exterior)(self.a)
        } else if i as usize >= self.n() {
            (self.exterior)(self.b)
        } else {
            self.values[i as usize]
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::Box {
            lo: Point::scalar(self.a),
            hi: Point::scalar(self.b),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u\n");
        for (x, u) in self.nodes().iter().zip(&self.values) {
            s.push_str(&format!("{x},{u}\n"));
        }
        s
    }
}

/// Values on the nodes of a tensor grid over a box (boundary nodes
/// included), used for weighted-norm diagnostics in two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction2D {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * nx + i]` at (x_i, y_j).
    pub values: Vec<f64>,
}

impl GridFunction2D {
    pub fn from_fn(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        let hx = (hi[0] - lo[0]) / (nx - 1) as f64;
        let hy = (hi[1] - lo[1]) / (ny - 1) as f64;
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(lo[0] + i as f64 * hx, lo[1] + j as f64 * hy));
            }
        }
        GridFunction2D {
            lo,
            hi,
            nx,
            ny,
            values,
        }
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.hi[0] - self.lo[0]) / (self.nx - 1) as f64,
            (self.hi[1] - self.lo[1]) / (self.ny - 1) as f64,
        )
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        let (hx, hy) = self.spacing();
        Point::from_slice(&[self.lo[0] + i as f64 * hx, self.lo[1] + j as f64 * hy])
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }
}

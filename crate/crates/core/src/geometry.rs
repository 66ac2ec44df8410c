use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Point or vector in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }

    pub fn to_array(self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn from_array(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> SubAssign for Vec2<T> {
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Projects `p` onto the closed disk of radius `r` centred at `c`.
pub fn project_to_disk<T: Real>(p: Vec2<T>, c: Vec2<T>, r: T) -> Vec2<T> {
    let d = p - c;
    let n = d.norm();
    if n <= r {
        p
    } else {
        c + d * (r / n)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn distance_to_segment<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == T::zero() {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one());
    (p - a.lerp(b, t)).norm()
}

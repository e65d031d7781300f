use crate::Scalar;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[a, b]` down to an interval of
/// width `tol`. Equal values keep the left part of the bracket.
pub(crate) fn golden_section_max<T: Scalar>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let r = T::c(INV_PHI);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if !(c > a && d < b) && b - a > tol {
            // no representable interior point left
            break;
        }
    }
    (a + b) * T::c(0.5)
}

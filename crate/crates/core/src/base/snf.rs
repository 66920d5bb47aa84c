//! 2×2 integer Smith normal form, tracking the column transform.

pub type IMat2 = [[i128; 2]; 2];

pub fn mat_mul(a: &IMat2, b: &IMat2) -> IMat2 {
    let mut c = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn det(a: &IMat2) -> i128 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Result of `U·K·V = diag(d1, d2)` with `d1 | d2`, `d1, d2 ≥ 0`.
#[derive(Debug, Clone)]
pub struct Smith {
    pub d: [i128; 2],
    pub u: IMat2,
    pub v: IMat2,
}

fn swap_rows(m: &mut IMat2, u: &mut IMat2) {
    m.swap(0, 1);
    u.swap(0, 1);
}

fn swap_cols(m: &mut IMat2, v: &mut IMat2) {
    for r in 0..2 {
        m[r].swap(0, 1);
        v[r].swap(0, 1);
    }
}

/// row[dst] -= q·row[src]
fn row_sub(m: &mut IMat2, u: &mut IMat2, dst: usize, src: usize, q: i128) {
    for c in 0..2 {
        m[dst][c] -= q * m[src][c];
        u[dst][c] -= q * u[src][c];
    }
}

/// col[dst] -= q·col[src]
fn col_sub(m: &mut IMat2, v: &mut IMat2, dst: usize, src: usize, q: i128) {
    for r in 0..2 {
        m[r][dst] -= q * m[r][src];
        v[r][dst] -= q * v[r][src];
    }
}

pub fn smith_normal_form(k: &IMat2) -> Smith {
    let mut m = *k;
    let mut u: IMat2 = [[1, 0], [0, 1]];
    let mut v: IMat2 = [[1, 0], [0, 1]];
    loop {
        // pivot: smallest nonzero |entry| to (0,0)
        let mut best: Option<(usize, usize)> = None;
        for r in 0..2 {
            for c in 0..2 {
                if m[r][c] != 0 && best.is_none_or(|(br, bc)| m[r][c].abs() < m[br][bc].abs()) {
                    best = Some((r, c));
                }
            }
        }
        let Some((r, c)) = best else { break };
        if r == 1 {
            swap_rows(&mut m, &mut u);
        }
        if c == 1 {
            swap_cols(&mut m, &mut v);
        }
        let p = m[0][0];
        let q_row = m[1][0].div_euclid(p);
        row_sub(&mut m, &mut u, 1, 0, q_row);
        let q_col = m[0][1].div_euclid(p);
        col_sub(&mut m, &mut v, 1, 0, q_col);
        if m[1][0] != 0 || m[0][1] != 0 {
            continue;
        }
        if m[1][1] % p != 0 {
            // fold row 1 into row 0 to restore divisibility
            for cc in 0..2 {
                m[0][cc] += m[1][cc];
                u[0][cc] += u[1][cc];
            }
            continue;
        }
        break;
    }
    for i in 0..2 {
        if m[i][i] < 0 {
            for cc in 0..2 {
                m[i][cc] = -m[i][cc];
                u[i][cc] = -u[i][cc];
            }
        }
    }
    Smith { d: [m[0][0], m[1][1]], u, v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(k: IMat2) {
        let s = smith_normal_form(&k);
        let prod = mat_mul(&mat_mul(&s.u, &k), &s.v);
        assert_eq!(prod, [[s.d[0], 0], [0, s.d[1]]], "{k:?}");
        assert_eq!(det(&s.u).abs(), 1);
        assert_eq!(det(&s.v).abs(), 1);
        if s.d[0] != 0 {
            assert_eq!(s.d[1] % s.d[0], 0);
        }
        assert_eq!((s.d[0] * s.d[1]).abs(), det(&k).abs());
    }

    #[test]
    fn small_cases() {
        check([[1, 1], [1, 0]]);
        check([[4, 3], [3, 1]]);
        check([[12, 8], [8, 4]]);
        check([[2, 0], [0, 3]]);
        check([[6, 4], [4, 6]]);
        check([[-5, 7], [3, -2]]);
        check([[33, 21], [21, 12]]);
    }

    #[test]
    fn exhaustive_small_entries() {
        for a in -4..=4 {
            for b in -4..=4 {
                for c in -4..=4 {
                    for d in -4..=4 {
                        check([[a, b], [c, d]]);
                    }
                }
            }
        }
    }
}

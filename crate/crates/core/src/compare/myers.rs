//! Linear-space Myers diff over interned line ids.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Run {
    Equal(usize),
    Delete(usize),
    Insert(usize),
}

struct V {
    offset: isize,
    values: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        V {
            offset: max_d as isize + 1,
            values: vec![0; 2 * max_d + 3],
        }
    }
}

impl std::ops::Index<isize> for V {
    type Output = usize;
    fn index(&self, k: isize) -> &usize {
        &self.values[(k + self.offset) as usize]
    }
}

impl std::ops::IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.values[(k + self.offset) as usize]
    }
}

struct Snake {
    x_start: usize,
    y_start: usize,
    x_end: usize,
    y_end: usize,
}

/// Shortest edit script between `a` and `b` as merged runs.
pub(crate) fn diff(a: &[u32], b: &[u32]) -> Vec<Run> {
    let max_d = (a.len() + b.len()).div_ceil(2) + 1;
    let mut vf = V::new(max_d);
    let mut vb = V::new(max_d);
    let mut runs = Vec::new();
    conquer(a, b, &mut vf, &mut vb, &mut runs);
    runs
}

fn push(runs: &mut Vec<Run>, run: Run) {
    let merged = match (runs.last_mut(), run) {
        (Some(Run::Equal(n)), Run::Equal(m))
        | (Some(Run::Delete(n)), Run::Delete(m))
        | (Some(Run::Insert(n)), Run::Insert(m)) => {
            *n += m;
            true
        }
        _ => false,
    };
    let empty = matches!(run, Run::Equal(0) | Run::Delete(0) | Run::Insert(0));
    if !merged && !empty {
        runs.push(run);
    }
}

fn conquer(a: &[u32], b: &[u32], vf: &mut V, vb: &mut V, runs: &mut Vec<Run>) {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    push(runs, Run::Equal(prefix));
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);

    if a.is_empty() {
        push(runs, Run::Insert(b.len()));
    } else if b.is_empty() {
        push(runs, Run::Delete(a.len()));
    } else {
        let snake = middle_snake(a, b, vf, vb);
        conquer(&a[..snake.x_start], &b[..snake.y_start], vf, vb, runs);
        push(runs, Run::Equal(snake.x_end - snake.x_start));
        conquer(&a[snake.x_end..], &b[snake.y_end..], vf, vb, runs);
    }
    push(runs, Run::Equal(suffix));
}

fn middle_snake(a: &[u32], b: &[u32], vf: &mut V, vb: &mut V) -> Snake {
    let n = a.len();
    let m = b.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;
    vf[1] = 0;
    vb[1] = 0;
    let d_max = (n + m).div_ceil(2) as isize;

    for d in 0..=d_max {
        for k in (-d..=d).step_by(2) {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) {
                vf[k + 1]
            } else {
                vf[k - 1] + 1
            };
            let mut y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            while x < n && y < m && a[x] == b[y] {
                x += 1;
                y += 1;
            }
            vf[k] = x;
            if odd && (k - delta).abs() < d && vf[k] + vb[-(k - delta)] >= n {
                return Snake {
                    x_start: x0,
                    y_start: y0,
                    x_end: x,
                    y_end: y,
                };
            }
        }

        for k in (-d..=d).step_by(2) {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) {
                vb[k + 1]
            } else {
                vb[k - 1] + 1
            };
            let mut y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            while x < n && y < m && a[n - x - 1] == b[m - y - 1] {
                x += 1;
                y += 1;
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && vb[k] + vf[-(k - delta)] >= n {
                return Snake {
                    x_start: n - x,
                    y_start: m - y,
                    x_end: n - x0,
                    y_end: m - y0,
                };
            }
        }
    }
    unreachable!("a middle snake always exists within (n + m) / 2 steps")
}

//! Voxel traversal for line-of-sight tests.

const TIE_EPS: f64 = 1e-9;

/// Cell containing the start of a ray leaving `origin` along `dir`.
fn start_cell(origin: f64, dir: f64) -> i32 {
    let c = origin.floor();
    if origin == c && dir < 0.0 {
        c as i32 - 1
    } else {
        c as i32
    }
}

/// Walks the cells pierced by the segment `origin -> target`, calling `visit` on
/// every cell before `target_cell`. Stops early when `visit` returns `true`.
///
/// When the segment crosses two or three cell faces at the same parameter the
/// traversal steps all tied axes at once, so the ray slips through an exact
/// edge or corner without touching the face-adjacent cells.
pub fn traverse(
    origin: [f64; 3],
    target: [f64; 3],
    target_cell: [i32; 3],
    mut visit: impl FnMut([i32; 3]) -> bool,
) -> bool {
    let dir = [target[0] - origin[0], target[1] - origin[1], target[2] - origin[2]];
    let mut cell = [
        start_cell(origin[0], dir[0]),
        start_cell(origin[1], dir[1]),
        start_cell(origin[2], dir[2]),
    ];
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for i in 0..3 {
        if dir[i] > 0.0 {
            step[i] = 1;
            t_max[i] = (cell[i] as f64 + 1.0 - origin[i]) / dir[i];
            t_delta[i] = 1.0 / dir[i];
        } else if dir[i] < 0.0 {
            step[i] = -1;
            t_max[i] = (cell[i] as f64 - origin[i]) / dir[i];
            t_delta[i] = -1.0 / dir[i];
        }
    }
    for _ in 0..256 {
        if cell == target_cell {
            return false;
        }
        if visit(cell) {
            return true;
        }
        let t = t_max[0].min(t_max[1]).min(t_max[2]);
        if t > 1.0 + TIE_EPS {
            return false;
        }
        for i in 0..3 {
            if t_max[i] <= t + TIE_EPS {
                cell[i] += step[i];
                t_max[i] += t_delta[i];
            }
        }
    }
    false
}

/// True when no opaque cell lies strictly between the origin and the target cell.
pub fn line_of_sight(
    origin: [f64; 3],
    target: [f64; 3],
    target_cell: [i32; 3],
    opaque: impl Fn(i32, i32, i32) -> bool,
) -> bool {
    !traverse(origin, target, target_cell, |c| opaque(c[0], c[1], c[2]))
}

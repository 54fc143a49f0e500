use super::{CellClass, IntermediateMap};
use crate::geometry::GridPos;

/// Grows non-traversable cells by `radius` pixels (Euclidean, centre to
/// centre). Only `FREE` cells are overwritten: trails and user-passable
/// cells are kept as drawn.
pub fn inflate_obstacles(map: &IntermediateMap, radius: f64) -> IntermediateMap {
    let mut out = map.clone();
    if radius > 0.0 {
        let all = (GridPos::new(0, 0), GridPos::new(map.width() as i32 - 1, map.height() as i32 - 1));
        stamp(map, &mut out, all, radius);
    }
    out
}

/// Recomputes the inflation of `raw` inside the inclusive cell box
/// `[lo, hi]` of `dst`, leaving everything else untouched.
pub fn inflate_within(raw: &IntermediateMap, dst: &mut IntermediateMap, lo: GridPos, hi: GridPos, radius: f64) {
    let lo = GridPos::new(lo.x.max(0), lo.y.max(0));
    let hi = GridPos::new(
        hi.x.min(raw.width() as i32 - 1),
        hi.y.min(raw.height() as i32 - 1),
    );
    if lo.x > hi.x || lo.y > hi.y {
        return;
    }
    let w = raw.width();
    for y in lo.y..=hi.y {
        let row = y as usize * w;
        dst.cells_mut()[row + lo.x as usize..=row + hi.x as usize]
            .copy_from_slice(&raw.cells()[row + lo.x as usize..=row + hi.x as usize]);
    }
    if radius > 0.0 {
        stamp(raw, dst, (lo, hi), radius);
    }
}

fn stamp(raw: &IntermediateMap, dst: &mut IntermediateMap, window: (GridPos, GridPos), radius: f64) {
    let r = radius.floor() as i32;
    let r2 = radius * radius;
    let (lo, hi) = window;
    let w = raw.width() as i32;
    let h = raw.height() as i32;
    let src = raw.cells();
    let blocked = |x: i32, y: i32| !src[(y * w + x) as usize].is_traversable();
    let disk: Vec<(i32, i32)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r2 && (dx, dy) != (0, 0))
        .collect();
    let y0 = (lo.y - r).max(0);
    let y1 = (hi.y + r).min(h - 1);
    let x0 = (lo.x - r).max(0);
    let x1 = (hi.x + r).min(w - 1);
    let cells = dst.cells_mut();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !blocked(x, y) {
                continue;
            }
            // interior obstacle cells cannot reach further than the boundary
            let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && !blocked(nx, ny)
            });
            if !boundary {
                continue;
            }
            for &(dx, dy) in &disk {
                let (nx, ny) = (x + dx, y + dy);
                if nx < lo.x || ny < lo.y || nx > hi.x || ny > hi.y {
                    continue;
                }
                let i = (ny * w + nx) as usize;
                if cells[i] == CellClass::Free {
                    cells[i] = CellClass::Obstacle;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grows_by_radius() {
        let m = IntermediateMap::from_ascii(&[".......", ".......", ".......", "...#...", ".......", ".......", "......."]);
        let out = inflate_obstacles(&m, 1.5);
        assert_eq!(out.count(CellClass::Obstacle), 9);
        let out = inflate_obstacles(&m, 2.0);
        assert_eq!(out.count(CellClass::Obstacle), 13);
    }

    #[test]
    fn keeps_trails() {
        let m = IntermediateMap::from_ascii(&["T#.", "..."]);
        let out = inflate_obstacles(&m, 1.0);
        assert_eq!(out.get(GridPos::new(0, 0)), Some(CellClass::Trail));
        assert_eq!(out.get(GridPos::new(2, 0)), Some(CellClass::Obstacle));
    }

    #[test]
    fn region_update_matches_full_recompute() {
        let base = IntermediateMap::from_ascii(&[
            "..........",
            "..#.......",
            "..........",
            "......##..",
            "..........",
            "..........",
        ]);
        let mut dst = inflate_obstacles(&base, 1.0);
        let mut edited = base.clone();
        edited.set(GridPos::new(6, 3), CellClass::Free);
        edited.set(GridPos::new(7, 3), CellClass::Free);
        edited.set(GridPos::new(8, 5), CellClass::Obstacle);
        inflate_within(&edited, &mut dst, GridPos::new(4, 1), GridPos::new(9, 5), 1.0);
        assert_eq!(dst, inflate_obstacles(&edited, 1.0));
    }
}

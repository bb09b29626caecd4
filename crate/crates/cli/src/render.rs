use std::fmt::Write as _;

use lcom_search::{Belief, Cell, OccupancyGrid};

/// Intensity ramp from zero to the maximum probability.
pub const GLYPHS: &[u8] = b" .:-=+*%@";

/// Text heatmap of a belief: three characters per cell, occupied cells as
/// `###`, the most likely cell bracketed.
pub fn render_belief(belief: &Belief, grid: &OccupancyGrid) -> String {
    let best = belief.map_estimate();
    let max = belief.prob(best);
    let top = GLYPHS.len() - 1;
    let mut out = String::new();
    let _ = writeln!(out, "max p = {max:.6} at ({}, {})", best.x, best.y);
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let c = Cell::new(x, y);
            if grid.is_occupied(c) {
                out.push_str("###");
                continue;
            }
            let level = if max > 0.0 { (belief.prob(c) / max * top as f64).round() as usize } else { 0 };
            let g = GLYPHS[level.min(top)] as char;
            if c == best {
                let _ = write!(out, "[{g}]");
            } else {
                let _ = write!(out, " {g} ");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_belief_is_flat() {
        let g = OccupancyGrid::open(3, 2);
        let out = render_belief(&Belief::uniform(&g).unwrap(), &g);
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(rows, ["[@] @  @ ", " @  @  @ "]);
    }

    #[test]
    fn point_mass_single_glyph() {
        let g: OccupancyGrid = ".#.\n...".parse().unwrap();
        let out = render_belief(&Belief::point_mass(&g, Cell::new(2, 1)).unwrap(), &g);
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(rows, ["   ###   ", "      [@]"]);
    }
}

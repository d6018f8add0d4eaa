use std::path::Path;

use fracperim::Grid;

use crate::commands::read_grid;
use crate::{CliError, Outcome};

/// floor(255·h/N), with N = 0 mapping everything to black.
fn gray(label: usize, chambers: usize) -> u8 {
    if chambers == 0 {
        0
    } else {
        (255 * label / chambers) as u8
    }
}

/// Binary PGM of a 2-D grid, or of the plane `axis = index` of a 3-D grid. Rows follow the
/// slower remaining axis.
pub fn pgm(grid: &Grid, slice: Option<(usize, usize)>) -> Result<Vec<u8>, CliError> {
    let d = grid.domain();
    let p = d.side();
    let (rows, cols, pick): (usize, usize, Box<dyn Fn(usize, usize) -> usize>) = match (d.n(), slice) {
        (1, _) => return Err(CliError::Lib(fracperim::Error::Unsupported("render needs n = 2 or 3; export 1-D grids as CSV".into()))),
        (2, None) => (p, p, Box::new(move |r, c| d.index(&[r, c]))),
        (2, Some(_)) => return Err(CliError::Usage("--slice applies only to 3-D grids".into())),
        (_, None) => return Err(CliError::Usage("3-D grids need --slice AXIS:INDEX".into())),
        (_, Some((axis, at))) => {
            if axis > 2 || at >= p {
                return Err(CliError::Usage(format!("--slice {axis}:{at} outside 0..3 x 0..{p}")));
            }
            let free: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
            (
                p,
                p,
                Box::new(move |r, c| {
                    let mut k = [0usize; 3];
                    k[axis] = at;
                    k[free[0]] = r;
                    k[free[1]] = c;
                    d.index(&k)
                }),
            )
        }
    };
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for r in 0..rows {
        for c in 0..cols {
            out.push(gray(grid.label(pick(r, c)), grid.chambers()));
        }
    }
    Ok(out)
}

fn parse_slice(raw: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--slice expects AXIS:INDEX, got {raw:?}"));
    let (a, i) = raw.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, i.trim().parse().map_err(|_| bad())?))
}

pub fn render_command(grid: &Path, out: &Path, slice: Option<&str>) -> Outcome {
    let g = read_grid(grid)?;
    let slice = slice.map(parse_slice).transpose()?;
    let bytes = pgm(&g, slice)?;
    std::fs::write(out, bytes)?;
    Ok(true)
}

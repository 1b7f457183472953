use super::{usage, CorruptArgs};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::image_io::{tile, Raster};
use crate::pyramid::{lap_corrupt, max_levels, CorruptionSpec, LevelChoice};
use crate::tensor::Tensor;

/// `random`, a single level, or an inclusive `a..b` range.
fn parse_levels(s: &str, top: usize) -> Result<Vec<LevelChoice>> {
    let out_of_range = |l: usize| usage(format!("level {l} out of range; valid levels are 0..={top}"));
    if s == "random" {
        return Ok(vec![LevelChoice::Random]);
    }
    let parse = |t: &str| -> Result<usize> {
        t.trim().parse().map_err(|_| usage(format!("bad level `{t}`; use N, A..B or random")))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let l = parse(s)?;
            (l, l)
        }
    };
    if a > b {
        return Err(usage(format!("empty level range {a}..{b}")));
    }
    if b > top {
        return Err(out_of_range(b));
    }
    Ok((a..=b).map(LevelChoice::Fixed).collect())
}

pub(crate) fn run(a: CorruptArgs) -> Result<()> {
    if a.format != "png" && a.format != "pgm" {
        return Err(usage(format!("unknown format `{}`; expected png or pgm", a.format)));
    }
    let x: Tensor = match &a.image {
        Some(path) => Raster::load(path)?.to_tensor()?,
        None => {
            let mut cfg = a.common.base_config()?;
            cfg.apply(&a.common.overrides());
            let cfg = cfg.resolve()?;
            let test = cfg.dataset.load(cfg.data_dir()?, Split::Test)?;
            if a.index >= test.len() {
                return Err(usage(format!("index {} outside 0..{}", a.index, test.len())));
            }
            test.images.sample(a.index)?
        }
    };
    let (_, _, h, w) = x.dims4()?;
    let depth = a.levels.min(max_levels(h, w));
    let levels = parse_levels(&a.level, depth - 1)?;
    let seed = a.common.seed.unwrap_or(0);
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let clean = Raster::from_sample(&x, 0)?;
    clean.save(&a.out.join(format!("clean.{}", a.format)))?;
    let mut tiles = vec![clean];
    for choice in levels {
        let spec = CorruptionSpec::gaussian(a.sigma, choice, seed);
        let (out, level) = lap_corrupt(&x, &spec, depth)?;
        let r = Raster::from_sample(&out, 0)?;
        let name = match choice {
            LevelChoice::Random => format!("random-level-{level}.{}", a.format),
            LevelChoice::Fixed(_) => format!("level-{level}.{}", a.format),
        };
        r.save(&a.out.join(&name))?;
        println!("{}", a.out.join(name).display());
        tiles.push(r);
    }
    tile(&tiles, tiles.len(), 1, 1.0)?.save(&a.out.join(format!("grid.{}", a.format)))?;
    Ok(())
}

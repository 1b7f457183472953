use super::{usage, ExportArgs};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::Split;
use crate::error::{Error, Result};
use crate::eval::{dump_first_layer_kernels, export_embeddings};
use crate::model::{extract_embedding, EmbeddingLayer};

pub(crate) fn run(a: ExportArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    match a.what.as_str() {
        "kernels" => {
            dump_first_layer_kernels(&ck.params, &a.out)?;
        }
        "embeddings" => {
            let mut cfg = match &a.common.config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::from_toml(&ck.config_toml)?,
            };
            cfg.apply(&a.common.overrides());
            let cfg = cfg.resolve()?;
            let layer: EmbeddingLayer = a.layer.parse()?;
            let test = cfg.dataset.load(cfg.data_dir()?, Split::Test)?;
            let emb = extract_embedding(&ck.params, &test.images, layer, a.budget)?;
            export_embeddings(&emb, &test.labels, &ck.fingerprint(), &a.out)?;
            let cfg_path = a.out.with_extension("config.toml");
            std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
        }
        other => return Err(usage(format!("unknown export `{other}`; expected embeddings or kernels"))),
    }
    println!("{}", a.out.display());
    Ok(())
}

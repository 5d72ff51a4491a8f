//! JSON-Lines dataset files: a header object followed by one object per
//! sample.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, TaskKind};

use super::{NoiseProfile, NoisyDataset, SplitTag};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    n: usize,
    d: usize,
    k: usize,
    head_mode: TaskKind,
    profile: Option<NoiseProfile>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clean_label: Option<Label>,
    noisy_label: Label,
    true_scales: Vec<f64>,
    split: SplitTag,
}

pub fn write_jsonl(ds: &NoisyDataset, mut out: impl Write) -> Result<()> {
    let header = Header {
        format_version: DATASET_FORMAT_VERSION,
        n: ds.len(),
        d: ds.dim(),
        k: ds.num_classes(),
        head_mode: ds.task(),
        profile: ds.profile().copied(),
        seed: ds.seed(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for i in 0..ds.len() {
        let row = Row {
            features: ds.features()[i].clone(),
            clean_label: ds.clean_labels().map(|c| c[i].clone()),
            noisy_label: ds.noisy_labels()[i].clone(),
            true_scales: ds.true_scales()[i].clone(),
            split: ds.split_tag(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<NoisyDataset> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset file".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format_version {}",
            header.format_version
        )));
    }
    let mut features = Vec::with_capacity(header.n);
    let mut clean = Vec::with_capacity(header.n);
    let mut noisy = Vec::with_capacity(header.n);
    let mut scales = Vec::with_capacity(header.n);
    let mut tag = None;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("sample {i}: {e}")))?;
        if row.features.len() != header.d {
            return Err(Error::Format(format!("sample {i}: expected {} features", header.d)));
        }
        if *tag.get_or_insert(row.split) != row.split {
            return Err(Error::Format("mixed split tags in one file".into()));
        }
        features.push(row.features);
        clean.push(row.clean_label);
        noisy.push(row.noisy_label);
        scales.push(row.true_scales);
    }
    if features.len() != header.n {
        return Err(Error::Format(format!(
            "header announces {} samples, found {}",
            header.n,
            features.len()
        )));
    }
    let clean_labels = if clean.iter().all(Option::is_some) {
        Some(clean.into_iter().flatten().collect())
    } else if clean.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::Format("clean_label present on some samples only".into()));
    };
    NoisyDataset::new(
        header.head_mode,
        header.k,
        features,
        clean_labels,
        noisy,
        scales,
        tag.unwrap_or(SplitTag::All),
        header.seed,
        header.profile,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisegen::{corrupt, make_clean_task, split};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_byte_identical(seed in any::<u64>(), n in 10usize..60, k in 2usize..4, scale in 0.0f64..3.0) {
            let task = make_clean_task(n, 3, k, seed).unwrap();
            let ds = corrupt(&task.features, &task.clean_labels, &task.logits,
                &NoiseProfile::region_ambiguity(scale, 2.0), seed ^ 1).unwrap();
            let mut bytes = Vec::new();
            write_jsonl(&ds, &mut bytes).unwrap();
            let back = read_jsonl(bytes.as_slice()).unwrap();
            prop_assert_eq!(&back, &ds);
            let mut again = Vec::new();
            write_jsonl(&back, &mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }

    #[test]
    fn split_files_carry_their_tag() {
        let task = make_clean_task(20, 2, 2, 1).unwrap();
        let ds = corrupt(&task.features, &task.clean_labels, &task.logits, &NoiseProfile::uniform_flip(1.0), 1).unwrap();
        let parts = split(&ds, [0.7, 0.2, 0.1], 1).unwrap();
        let mut bytes = Vec::new();
        write_jsonl(&parts[1], &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(text.lines().nth(1).unwrap().contains("\"split\":\"val\""));
        assert_eq!(read_jsonl(bytes.as_slice()).unwrap().split_tag(), SplitTag::Val);
    }

    #[test]
    fn missing_clean_labels_are_allowed() {
        let text = "{\"format_version\":1,\"n\":1,\"d\":1,\"k\":2,\"head_mode\":\"multiclass\",\"profile\":null,\"seed\":0}\n\
                    {\"features\":[0.5],\"noisy_label\":1,\"true_scales\":[0.0,0.0],\"split\":\"test\"}\n";
        let ds = read_jsonl(text.as_bytes()).unwrap();
        assert!(ds.clean_labels().is_none());
        assert!(read_jsonl(text.replace("\"n\":1", "\"n\":2").as_bytes()).is_err());
    }
}

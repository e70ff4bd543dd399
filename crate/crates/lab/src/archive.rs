//! CSV persistence of sample archives.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use fpp_core::estimators::{ArchiveMeta, SampleArchive, SampleKey, SampleRecord};

pub const HEADER: [&str; 10] = ["dim", "dist", "shape", "dir", "xnorm", "replica", "T", "R", "backtrack", "truncated"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes rows sorted by direction, `|x|` and replica.
pub fn write_archive<W: Write>(out: W, a: &SampleArchive) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let dim = a.meta.dim.to_string();
    for r in a.sorted() {
        w.write_record([
            dim.as_str(),
            &a.meta.dist,
            &a.meta.shape,
            &r.key.dir,
            &fmt_f64(r.key.xnorm),
            &r.replica.to_string(),
            &fmt_f64(r.time),
            &fmt_f64(r.wandering),
            &fmt_f64(r.backtrack),
            if r.truncated { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn archive_to_string(a: &SampleArchive) -> Result<String> {
    let mut buf = Vec::new();
    write_archive(&mut buf, a)?;
    Ok(String::from_utf8(buf)?)
}

pub fn read_archive<R: Read>(input: R) -> Result<SampleArchive> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        bail!("unexpected archive header: {}", header.join(","));
    }
    let mut meta: Option<ArchiveMeta> = None;
    let mut records = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |k: usize| row.get(k).with_context(|| format!("line {line}: missing column {}", HEADER[k]));
        let num = |k: usize| -> Result<f64> {
            field(k)?.trim().parse::<f64>().with_context(|| format!("line {line}: bad {}", HEADER[k]))
        };
        let m = ArchiveMeta {
            dim: field(0)?.parse().with_context(|| format!("line {line}: bad dim"))?,
            dist: field(1)?.to_owned(),
            shape: field(2)?.to_owned(),
            seed: 0,
        };
        match &meta {
            None => meta = Some(m),
            Some(prev) if prev.dim != m.dim || prev.dist != m.dist || prev.shape != m.shape => {
                bail!("line {line}: metadata differs from earlier rows")
            }
            _ => {}
        }
        let truncated = match field(9)? {
            "0" | "false" => false,
            "1" | "true" => true,
            other => bail!("line {line}: bad truncated flag `{other}`"),
        };
        records.push(SampleRecord {
            key: SampleKey::new(field(3)?, num(4)?),
            replica: field(5)?.parse().with_context(|| format!("line {line}: bad replica"))?,
            time: num(6)?,
            wandering: num(7)?,
            backtrack: num(8)?,
            truncated,
        });
    }
    Ok(SampleArchive::from_records(meta.unwrap_or_default(), records)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let meta = ArchiveMeta { dim: 2, dist: "exp:1".into(), shape: "l2".into(), seed: 0 };
        let mut a = SampleArchive::new(meta);
        for rep in [1u64, 0] {
            a.push(SampleRecord {
                key: SampleKey::new("1:0", 8.0),
                replica: rep,
                time: 0.1 + rep as f64 / 3.0,
                wandering: 1.0 / 7.0,
                backtrack: 0.0,
                truncated: rep == 1,
            })
            .unwrap();
        }
        let text = archive_to_string(&a).unwrap();
        assert!(text.starts_with("dim,dist,shape,dir,xnorm,replica,T,R,backtrack,truncated\n2,exp:1,l2,1:0,"));
        let back = read_archive(text.as_bytes()).unwrap();
        assert_eq!(archive_to_string(&back).unwrap(), text);
        assert_eq!(back.sorted()[1].time, 0.1 + 1.0 / 3.0);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_archive("a,b\n1,2\n".as_bytes()).is_err());
    }
}

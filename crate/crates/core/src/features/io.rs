//! Tab-separated instance files.
//!
//! ```text
//! #format=ergan-instances/1
//! #q=2
//! id_i  id_j  title  authors  label
//! a1  b7  0.25  1  M
//! a1  b9  0  0.5
//! ```
//!
//! `q` is `none` for instances that did not come from q-gram featurization.
//! The label cell is `M`, `N` or empty.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Instance, Label};
use crate::error::{open_file, Error, Result};

pub const INSTANCE_FORMAT: &str = "ergan-instances/1";

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub schema: Vec<String>,
    pub q: Option<usize>,
    pub instances: Vec<Instance>,
}

/// Line-at-a-time instance writer.
pub struct InstanceWriter<W: Write> {
    out: W,
    dims: usize,
    written: u64,
}

impl InstanceWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: &Path, schema: &[String], q: Option<usize>) -> Result<Self> {
        let file = std::fs::File::create(path)?;
        Self::new(std::io::BufWriter::new(file), schema, q)
    }
}

impl<W: Write> InstanceWriter<W> {
    pub fn new(mut out: W, schema: &[String], q: Option<usize>) -> Result<Self> {
        if let Some(bad) = schema.iter().find(|s| s.contains(['\t', '\n'])) {
            return Err(Error::format("schema", format!("attribute name {bad:?} contains a tab or newline")));
        }
        writeln!(out, "#format={INSTANCE_FORMAT}")?;
        match q {
            Some(q) => writeln!(out, "#q={q}")?,
            None => writeln!(out, "#q=none")?,
        }
        write!(out, "id_i\tid_j")?;
        for name in schema {
            write!(out, "\t{name}")?;
        }
        writeln!(out, "\tlabel")?;
        Ok(Self {
            out,
            dims: schema.len(),
            written: 0,
        })
    }

    pub fn write(&mut self, x: &Instance) -> Result<()> {
        x.validate(self.dims)?;
        for id in [&x.pair.0, &x.pair.1] {
            if id.contains(['\t', '\n']) {
                return Err(Error::format("instance", format!("id {id:?} contains a tab or newline")));
            }
        }
        write!(self.out, "{}\t{}", x.pair.0, x.pair.1)?;
        for v in &x.features {
            write!(self.out, "\t{v}")?;
        }
        match x.real_label {
            Some(l) => writeln!(self.out, "\t{l}")?,
            None => writeln!(self.out, "\t")?,
        }
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn read_instances(path: &Path) -> Result<InstanceFile> {
    let ctx = path.display().to_string();
    let mut lines = BufReader::new(open_file(path)?).lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format(&ctx, format!("missing {what} line")))
    };
    let format = next("format")?;
    if format != format!("#format={INSTANCE_FORMAT}") {
        return Err(Error::format(&ctx, format!("unsupported header {format:?}")));
    }
    let q_line = next("q")?;
    let q = match q_line.strip_prefix("#q=") {
        Some("none") => None,
        Some(v) => Some(
            v.parse()
                .map_err(|_| Error::format(&ctx, format!("bad q value {v:?}")))?,
        ),
        None => return Err(Error::format(&ctx, "missing #q= line")),
    };
    let header = next("column header")?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 || cols[0] != "id_i" || cols[1] != "id_j" || cols[cols.len() - 1] != "label" {
        return Err(Error::format(&ctx, "column header must be id_i, id_j, <features>, label"));
    }
    let schema: Vec<String> = cols[2..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let dims = schema.len();

    let mut instances = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = n + 4;
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != dims + 3 {
            return Err(Error::format(
                &ctx,
                format!("line {row}: expected {} cells, found {}", dims + 3, cells.len()),
            ));
        }
        let features = cells[2..2 + dims]
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::format(&ctx, format!("line {row}: bad feature {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let real_label = match cells[dims + 2] {
            "" => None,
            l => Some(l.parse::<Label>()?),
        };
        let x = Instance {
            pair: (cells[0].to_string(), cells[1].to_string()),
            features,
            real_label,
        };
        x.validate(dims)
            .map_err(|e| Error::format(&ctx, format!("line {row}: {e}")))?;
        instances.push(x);
    }
    Ok(InstanceFile {
        schema,
        q,
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<Instance> {
        vec![
            Instance {
                pair: ("a".into(), "b".into()),
                features: vec![0.1 + 0.2, 1.0],
                real_label: Some(Label::Match),
            },
            Instance {
                pair: ("a".into(), "c".into()),
                features: vec![0.0, 1.0 / 3.0],
                real_label: None,
            },
        ]
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        let schema = vec!["title".to_string(), "year".to_string()];
        let mut w = InstanceWriter::create(&p, &schema, Some(2)).unwrap();
        for x in sample() {
            w.write(&x).unwrap();
        }
        assert_eq!(w.written(), 2);
        w.finish().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("#format=ergan-instances/1\n#q=2\nid_i\tid_j\ttitle\tyear\tlabel\n"));
        let f = read_instances(&p).unwrap();
        assert_eq!(f.schema, schema);
        assert_eq!(f.q, Some(2));
        assert_eq!(f.instances, sample());
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        assert!(matches!(read_instances(&p), Err(Error::MissingFile(_))));
        for body in [
            "id_i\tid_j\tlabel\n",
            "#format=ergan-instances/1\n#q=2\nid_i\tid_j\tf\tlabel\na\tb\t0.5\n",
            "#format=ergan-instances/1\n#q=2\nid_i\tid_j\tf\tlabel\na\tb\t1.5\tM\n",
            "#format=ergan-instances/1\n#q=2\nid_i\tid_j\tf\tlabel\na\tb\t0.5\tX\n",
            "#format=ergan-instances/1\n#q=x\nid_i\tid_j\tf\tlabel\n",
        ] {
            std::fs::write(&p, body).unwrap();
            assert!(read_instances(&p).is_err(), "{body:?}");
        }
    }

    #[test]
    fn writer_validates() {
        let mut w = InstanceWriter::new(Vec::new(), &["f".to_string()], None).unwrap();
        let mut x = sample().remove(0);
        assert!(w.write(&x).is_err());
        x.features.truncate(1);
        x.features[0] = 0.5;
        w.write(&x).unwrap();
        let out = String::from_utf8(w.finish().unwrap()).unwrap();
        assert!(out.contains("#q=none\n"));
        assert!(out.ends_with("a\tb\t0.5\tM\n"));
    }

    proptest! {
        #[test]
        fn features_survive_text_roundtrip(vals in prop::collection::vec(0.0f64..=1.0, 1..6)) {
            let schema: Vec<String> = (0..vals.len()).map(|i| format!("f{i}")).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.tsv");
            let mut w = InstanceWriter::create(&p, &schema, None).unwrap();
            let x = Instance { pair: ("p".into(), "q".into()), features: vals.clone(), real_label: Some(Label::NonMatch) };
            w.write(&x).unwrap();
            w.finish().unwrap();
            prop_assert_eq!(read_instances(&p).unwrap().instances, vec![x]);
        }
    }
}

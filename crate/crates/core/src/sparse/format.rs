//! Single-file persistence for [`InvertedIndex`].
//!
//! All integers are little-endian. Strings are UTF-8 prefixed by their byte
//! length.
//!
//! ```text
//! magic         8 bytes   "RARSIDX1"
//! N             u64       number of entries
//! avg_len       f64       mean entry length in tokens
//! doc table     N x { id_len u32, id bytes, length u32 }
//! T             u64       number of terms
//! dictionary    T x { term_len u32, term bytes, df u32, offset u64 }
//! postings      sum(df) x { position u32, tf u32 }
//! ```
//!
//! Dictionary entries are sorted by term bytes; `offset` counts postings (not
//! bytes) from the start of the postings section and each term's postings are
//! sorted by position. Multi-view indices repeat a document id on
//! consecutive entries. Loading re-checks every table invariant.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::index::mean_length;
use super::{InvertedIndex, Posting};
use crate::corpus::DocId;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RARSIDX1";

impl InvertedIndex {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&self.avg_doc_length.to_le_bytes())?;
        for (id, len) in self.ids.iter().zip(&self.doc_lengths) {
            write_str(out, id.as_str())?;
            out.write_all(&len.to_le_bytes())?;
        }

        let mut terms: Vec<(&String, &Vec<Posting>)> = self.postings.iter().collect();
        terms.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        out.write_all(&(terms.len() as u64).to_le_bytes())?;
        let mut offset = 0u64;
        for (term, plist) in &terms {
            write_str(out, term)?;
            out.write_all(&(plist.len() as u32).to_le_bytes())?;
            out.write_all(&offset.to_le_bytes())?;
            offset += plist.len() as u64;
        }
        for (_, plist) in &terms {
            for p in plist.iter() {
                out.write_all(&p.doc.to_le_bytes())?;
                out.write_all(&p.tf.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file), path)
    }

    /// Reads an index; `path` is only used in error messages.
    pub fn read_from(input: &mut impl Read, path: &Path) -> Result<Self> {
        let mut r = Reader { input, path };
        let mut magic = [0u8; 8];
        r.exact(&mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::format(path, "not a sparse index file (bad magic)"));
        }
        let n = r.u64("entry count")? as usize;
        let avg_len = f64::from_le_bytes(r.array("average length")?);

        let mut ids = Vec::with_capacity(n.min(1 << 20));
        let mut doc_lengths = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            ids.push(DocId::from(r.string("document id")?));
            doc_lengths.push(r.u32("document length")?);
        }

        let term_count = r.u64("term count")? as usize;
        let mut dictionary = Vec::with_capacity(term_count.min(1 << 20));
        let mut expected_offset = 0u64;
        for _ in 0..term_count {
            let term = r.string("term")?;
            let df = r.u32("document frequency")?;
            let offset = r.u64("postings offset")?;
            if offset != expected_offset {
                return Err(Error::format(
                    path,
                    format!("postings offset of `{term}` is {offset}, expected {expected_offset}"),
                ));
            }
            if let Some((prev, _)) = dictionary.last() {
                if String::as_bytes(prev) >= term.as_bytes() {
                    return Err(Error::format(path, "term dictionary is not sorted"));
                }
            }
            expected_offset += u64::from(df);
            dictionary.push((term, df));
        }

        let mut postings = HashMap::with_capacity(dictionary.len());
        let mut tf_sums = vec![0u64; n];
        for (term, df) in dictionary {
            let mut plist = Vec::with_capacity(df as usize);
            for _ in 0..df {
                let doc = r.u32("posting position")?;
                let tf = r.u32("posting frequency")?;
                if doc as usize >= n || tf == 0 {
                    return Err(Error::format(path, format!("invalid posting for `{term}`")));
                }
                if plist.last().is_some_and(|p: &Posting| p.doc >= doc) {
                    return Err(Error::format(path, format!("postings of `{term}` are not sorted")));
                }
                tf_sums[doc as usize] += u64::from(tf);
                plist.push(Posting { doc, tf });
            }
            postings.insert(term, plist);
        }
        let mut probe = [0u8; 1];
        if r.input.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::format(path, "trailing bytes after postings"));
        }
        if let Some(pos) = (0..n).find(|&i| tf_sums[i] != u64::from(doc_lengths[i])) {
            return Err(Error::format(
                path,
                format!("length of entry {pos} does not match its term frequencies"),
            ));
        }
        if mean_length(&doc_lengths).to_bits() != avg_len.to_bits() {
            return Err(Error::format(path, "stored average length is inconsistent"));
        }
        InvertedIndex::from_parts(ids, doc_lengths, postings)
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

fn write_str(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    let len = u32::try_from(s.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "string too long"))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())
}

struct Reader<'a, R> {
    input: &'a mut R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.input.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.path, format!("truncated while reading {what}"))
            } else {
                Error::io(self.path, e)
            }
        })
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.exact(&mut buf, what)?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let mut buf = vec![0u8; len];
        self.exact(&mut buf, what)?;
        String::from_utf8(buf).map_err(|_| Error::format(self.path, format!("{what} is not UTF-8")))
    }
}

//! Haplotype matrix in TSV form: a header of marker ids, then one row per
//! haplotype with cells `0`, `1` or `.` for missing.

use std::collections::HashSet;
use std::io::BufRead;

use crate::error::{LdError, Result};
use crate::tables::CountTable;

const MISSING: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct HaplotypeMatrix {
    markers: Vec<String>,
    /// Column-major: `alleles[marker][haplotype]`, with `MISSING` for `.`.
    alleles: Vec<Vec<u8>>,
}

impl HaplotypeMatrix {
    /// Blank lines and lines starting with `#` are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut markers: Option<Vec<String>> = None;
        let mut alleles: Vec<Vec<u8>> = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let Some(ids) = &markers else {
                let ids: Vec<String> = fields.iter().map(|s| s.trim().to_string()).collect();
                let mut seen = HashSet::new();
                for id in &ids {
                    if id.is_empty() {
                        return Err(LdError::Parse(format!("line {lineno}: empty marker id")));
                    }
                    if !seen.insert(id.as_str()) {
                        return Err(LdError::Parse(format!("line {lineno}: duplicate marker id '{id}'")));
                    }
                }
                alleles = vec![Vec::new(); ids.len()];
                markers = Some(ids);
                continue;
            };
            if fields.len() != ids.len() {
                return Err(LdError::Parse(format!(
                    "line {lineno}: expected {} cells, found {}",
                    ids.len(),
                    fields.len()
                )));
            }
            for (col, cell) in alleles.iter_mut().zip(&fields) {
                col.push(match cell.trim() {
                    "0" => 0,
                    "1" => 1,
                    "." => MISSING,
                    other => return Err(LdError::Parse(format!("line {lineno}: bad allele '{other}'"))),
                });
            }
        }
        let markers = markers.ok_or_else(|| LdError::Parse("haplotype file has no header".into()))?;
        Ok(Self { markers, alleles })
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn haplotypes(&self) -> usize {
        self.alleles.first().map_or(0, Vec::len)
    }

    pub fn missing_fraction(&self, marker: usize) -> f64 {
        let col = &self.alleles[marker];
        col.iter().filter(|&&a| a == MISSING).count() as f64 / col.len() as f64
    }

    /// Minor allele frequency among non-missing haplotypes; NaN if all are missing.
    pub fn minor_allele_frequency(&self, marker: usize) -> f64 {
        let (mut ones, mut seen) = (0usize, 0usize);
        for &a in &self.alleles[marker] {
            if a != MISSING {
                seen += 1;
                ones += usize::from(a);
            }
        }
        let p = ones as f64 / seen as f64;
        p.min(1.0 - p)
    }

    /// Complete-case counts `[n00, n01, n10, n11]` with marker `i` as rows.
    pub fn pair_counts(&self, i: usize, j: usize) -> [u64; 4] {
        let mut n = [0u64; 4];
        for (&a, &b) in self.alleles[i].iter().zip(&self.alleles[j]) {
            if a != MISSING && b != MISSING {
                n[usize::from(2 * a + b)] += 1;
            }
        }
        n
    }

    pub fn pair_table(&self, i: usize, j: usize) -> Option<CountTable> {
        CountTable::from_cells(self.pair_counts(i, j)).ok()
    }
}

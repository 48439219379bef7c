//! The bundled example equations.
//!
//! Files are compiled into the binary; setting `NDSTAB_CORPUS_DIR` makes
//! [`load`] and [`waivers`] read them from that directory instead.

use std::path::PathBuf;

use crate::eqspec::{EquationSpec, SpecError};

pub const CORPUS_DIR_ENV: &str = "NDSTAB_CORPUS_DIR";

pub struct CorpusEntry {
    /// Example number used by `ndstab examples --id`.
    pub id: u8,
    pub label: &'static str,
    pub file: &'static str,
    pub title: &'static str,
    text: &'static str,
}

pub const ENTRIES: [CorpusEntry; 5] = [
    CorpusEntry {
        id: 1,
        label: "example1",
        file: "eq15.json",
        title: "constant neutral coefficient 0.6 with variable neutral delay",
        text: include_str!("../corpus/eq15.json"),
    },
    CorpusEntry {
        id: 2,
        label: "ex2new",
        file: "ex1eq1.json",
        title: "variable coefficients and delays, (alpha, r) feasibility band",
        text: include_str!("../corpus/ex1eq1.json"),
    },
    CorpusEntry {
        id: 3,
        label: "example3",
        file: "ex2eq1.json",
        title: "constant delays, comparison with the known asymptotic tests",
        text: include_str!("../corpus/ex2eq1.json"),
    },
    CorpusEntry {
        id: 4,
        label: "ex3",
        file: "eq20.json",
        title: "sign-changing neutral coefficient",
        text: include_str!("../corpus/eq20.json"),
    },
    CorpusEntry {
        id: 5,
        label: "ex5",
        file: "eq22.json",
        title: "pantograph-type neutral equation",
        text: include_str!("../corpus/eq22.json"),
    },
];

const WAIVERS: &str = include_str!("../corpus/waivers.json");

fn corpus_dir() -> Option<PathBuf> {
    std::env::var_os(CORPUS_DIR_ENV).map(PathBuf::from)
}

pub fn entry(id: u8) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.id == id)
}

pub fn entry_by_label(label: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.label == label)
}

impl CorpusEntry {
    pub fn load(&self) -> Result<EquationSpec, SpecError> {
        match corpus_dir() {
            Some(dir) => EquationSpec::from_path(&dir.join(self.file)),
            None => EquationSpec::from_json_str(self.text),
        }
    }

    /// The bundled copy, ignoring `NDSTAB_CORPUS_DIR`.
    pub fn bundled(&self) -> EquationSpec {
        EquationSpec::from_json_str(self.text)
            .unwrap_or_else(|e| panic!("bundled corpus file {} is invalid: {e}", self.file))
    }
}

/// Quote keys whose mismatch is known and accepted.
pub fn waivers() -> Result<Vec<String>, SpecError> {
    let text = match corpus_dir() {
        Some(dir) => {
            let path = dir.join("waivers.json");
            std::fs::read_to_string(&path).map_err(|source| SpecError::Io {
                path: path.display().to_string(),
                source,
            })?
        }
        None => WAIVERS.to_owned(),
    };
    parse_waivers(&text)
}

pub fn parse_waivers(text: &str) -> Result<Vec<String>, SpecError> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Waivers {
        waived: Vec<String>,
    }
    Ok(serde_json::from_str::<Waivers>(text)?.waived)
}

pub fn example1() -> EquationSpec {
    ENTRIES[0].bundled()
}

/// Feasibility-band family; `b` carries the parameter `r`.
pub fn ex2new() -> EquationSpec {
    ENTRIES[1].bundled()
}

/// Constant-delay family compared against the known tests; parameter `r`.
pub fn example3() -> EquationSpec {
    ENTRIES[2].bundled()
}

pub fn ex3() -> EquationSpec {
    ENTRIES[3].bundled()
}

pub fn ex5() -> EquationSpec {
    ENTRIES[4].bundled()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_file_parses_and_round_trips() {
        for e in &ENTRIES {
            let spec = e.bundled();
            let again = EquationSpec::from_json_str(&spec.to_json_string()).unwrap();
            assert_eq!(spec, again, "{}", e.file);
        }
    }

    #[test]
    fn bundled_waivers_parse() {
        assert_eq!(parse_waivers(WAIVERS).unwrap().len(), 5);
    }
}

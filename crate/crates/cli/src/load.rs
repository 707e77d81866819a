//! Reading emails, bot rosters and lexicons from disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crowdtone_core::provider::{BotProfile, Lexicon, LexiconSet, SimulationEmail};
use crowdtone_core::EmailSubmission;
use serde::Deserialize;

pub fn email_file(path: &Path) -> Result<EmailSubmission> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Every `*.json` file in `dir`, in file-name order, labelled by file stem.
pub fn email_dir(dir: &Path) -> Result<Vec<SimulationEmail>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .json emails in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            Ok(SimulationEmail {
                label: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                email: email_file(p)?,
            })
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RosterFile {
    Plain(Vec<BotProfile>),
    WithLexicons {
        #[serde(default)]
        lexicons: BTreeMap<String, PathBuf>,
        bots: Vec<BotProfile>,
    },
}

/// A bot roster: either a JSON array of bots, or an object with `bots` and
/// a `lexicons` map from name to a file path relative to the roster.
pub fn roster(path: &Path) -> Result<(Vec<BotProfile>, LexiconSet)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed: RosterFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut set = LexiconSet::default();
    let (bots, files) = match parsed {
        RosterFile::Plain(bots) => (bots, BTreeMap::new()),
        RosterFile::WithLexicons { lexicons, bots } => (bots, lexicons),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    for (name, file) in files {
        let full = base.join(&file);
        let src = fs::read_to_string(&full).with_context(|| format!("reading lexicon {}", full.display()))?;
        let lexicon: Lexicon = src.parse().with_context(|| format!("lexicon {}", full.display()))?;
        set.insert(name, lexicon);
    }
    Ok((bots, set))
}

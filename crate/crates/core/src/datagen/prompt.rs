use std::path::Path;

use crate::{Error, Result};

pub const NAME_PLACEHOLDER: &str = "[FULL NAME]";
pub const PORTRAIT_TEMPLATE: &str = "A professional portrait of [FULL NAME]";

/// Substitutes `full_name` for the single `[FULL NAME]` token.
pub fn enrich_prompt(template: &str, full_name: &str) -> Result<String> {
    match template.matches(NAME_PLACEHOLDER).count() {
        0 => Err(Error::MissingPlaceholder),
        1 => Ok(template.replacen(NAME_PLACEHOLDER, full_name, 1)),
        n => Err(Error::MultiplePlaceholders(n)),
    }
}

/// Full names used to diversify prompts.
#[derive(Clone, Debug, PartialEq)]
pub struct NamePool {
    names: Vec<String>,
    source: String,
}

impl NamePool {
    pub fn new(names: Vec<String>, source: impl Into<String>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(|n| n.trim().to_string()).collect();
        if names.is_empty() {
            return Err(Error::EmptyNamePool);
        }
        if names.iter().any(String::is_empty) {
            return Err(Error::Config("name pool contains an empty name".into()));
        }
        Ok(Self { names, source: source.into() })
    }

    /// One name per line, UTF-8; blank lines are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let names = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        Self::new(names, path.display().to_string())
    }

    /// A small fixed pool of invented names for smoke runs.
    pub fn builtin() -> Self {
        let names = [
            "Amara Okafor", "Lukas Brandt", "Mei Lin Zhou", "Santiago Ruiz", "Priya Raghavan",
            "Yusuf Demir", "Ingrid Halvorsen", "Kwame Mensah", "Sofia Marchetti", "Hiroshi Tanaka",
            "Leila Haddad", "Mateo Fernandez", "Anika Sharma", "Tomasz Kowalski", "Nia Thompson",
            "Omar Farouk", "Chloe Dubois", "Ravi Menon", "Elena Petrova", "Diego Alvarez",
            "Fatima Zahra", "Jonas Lindqvist", "Aiyana Redcloud", "Kenji Watanabe",
        ];
        Self::new(names.iter().map(|s| s.to_string()).collect(), "builtin").expect("non-empty")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Name for sample `i`, cycling through the pool.
    pub fn cycled(&self, i: usize) -> &str {
        &self.names[i % self.names.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enrichment() {
        assert_eq!(
            enrich_prompt(PORTRAIT_TEMPLATE, "Ada Lovelace").unwrap(),
            "A professional portrait of Ada Lovelace"
        );
        assert_eq!(enrich_prompt("[FULL NAME]", "X").unwrap(), "X");
        assert!(matches!(enrich_prompt("A professional business portrait", "X"), Err(Error::MissingPlaceholder)));
        assert!(matches!(
            enrich_prompt("[FULL NAME] and [FULL NAME]", "X"),
            Err(Error::MultiplePlaceholders(2))
        ));
        // the name is inserted verbatim, even when it looks like a placeholder
        assert_eq!(enrich_prompt("by [FULL NAME].", " [FULL NAME] ").unwrap(), "by  [FULL NAME] .");
    }

    #[test]
    fn pool_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("names.txt");
        std::fs::write(&p, "  Ada Lovelace \n\nAlan Turing\n").unwrap();
        let pool = NamePool::from_file(&p).unwrap();
        assert_eq!(pool.names(), &["Ada Lovelace", "Alan Turing"]);
        assert_eq!(pool.cycled(3), "Alan Turing");
        std::fs::write(&p, "\n \n").unwrap();
        assert!(matches!(NamePool::from_file(&p), Err(Error::EmptyNamePool)));
    }
}

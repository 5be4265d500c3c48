//! Plain-text prompt templates.
//!
//! A template file is a sequence of `@@section` header lines, each followed by
//! the section body. Wrapper sections (`claim`, `subclaim`, `label`,
//! `evidence`) hold one line with a single `{text}` placeholder; the parts
//! before and after it are the open and close tags. `preamble` and `footer`
//! are emitted verbatim around the rendered blocks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::sha256_hex;
use crate::model::EvidenceConfiguration;

const PLACEHOLDER: &str = "{text}";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template is missing section @@{0}")]
    MissingSection(&'static str),
    #[error("unknown template section @@{0}")]
    UnknownSection(String),
    #[error("section @@{0} must contain exactly one {{text}} placeholder")]
    BadWrapper(&'static str),
    #[error("unknown template family {0:?}")]
    UnknownFamily(String),
    #[error("text before the first @@section header")]
    LeadingText,
}

/// Which prompts a template can render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateFamily {
    /// Claim plus claim-level evidence only.
    Vanilla,
    /// Claim with sub-claims (SRE, SAE and their ablations).
    Decomposition,
    /// Single sub-claim verification.
    Subclaim,
    /// Claim decomposition into statements.
    Decomposer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Wrapper {
    pub open: String,
    pub close: String,
}

impl Wrapper {
    fn parse(section: &'static str, body: &str) -> Result<Self, TemplateError> {
        let line = body.trim_matches('\n');
        if line.matches(PLACEHOLDER).count() != 1 || line.contains('\n') {
            return Err(TemplateError::BadWrapper(section));
        }
        let (open, close) = line.split_once(PLACEHOLDER).expect("placeholder present");
        Ok(Self {
            open: open.to_string(),
            close: close.to_string(),
        })
    }

    pub fn wrap(&self, text: &str) -> String {
        format!("{}{}{}", self.open, text, self.close)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    pub name: String,
    pub family: TemplateFamily,
    pub preamble: String,
    pub footer: String,
    pub claim: Wrapper,
    pub subclaim: Wrapper,
    pub label: Wrapper,
    pub evidence: Wrapper,
    /// SHA-256 of the template source text.
    pub hash: String,
}

impl PromptTemplate {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in source.lines() {
            if let Some(name) = line.strip_prefix("@@") {
                let name = name.trim().to_string();
                if !matches!(
                    name.as_str(),
                    "name" | "family" | "preamble" | "footer" | "claim" | "subclaim" | "label" | "evidence"
                ) {
                    return Err(TemplateError::UnknownSection(name));
                }
                sections.insert(name.clone(), String::new());
                current = Some(name);
                continue;
            }
            match &current {
                Some(name) => {
                    let body = sections.get_mut(name).expect("section inserted");
                    body.push_str(line);
                    body.push('\n');
                }
                None if line.trim().is_empty() => {}
                None => return Err(TemplateError::LeadingText),
            }
        }
        let mut take = |key: &'static str| {
            sections
                .remove(key)
                .map(|s| s.trim_end_matches('\n').to_string())
                .ok_or(TemplateError::MissingSection(key))
        };
        let name = take("name")?.trim().to_string();
        let family = match take("family")?.trim() {
            "vanilla" => TemplateFamily::Vanilla,
            "decomposition" => TemplateFamily::Decomposition,
            "subclaim" => TemplateFamily::Subclaim,
            "decomposer" => TemplateFamily::Decomposer,
            other => return Err(TemplateError::UnknownFamily(other.to_string())),
        };
        Ok(Self {
            name,
            family,
            preamble: take("preamble")?,
            footer: take("footer")?,
            claim: Wrapper::parse("claim", &take("claim")?)?,
            subclaim: Wrapper::parse("subclaim", &take("subclaim")?)?,
            label: Wrapper::parse("label", &take("label")?)?,
            evidence: Wrapper::parse("evidence", &take("evidence")?)?,
            hash: sha256_hex(source.as_bytes()),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&source)
    }

    /// Claim-level prompt with claim evidence only.
    pub fn default_vanilla() -> Self {
        Self::parse(include_str!("../../templates/vanilla.txt")).expect("shipped template parses")
    }

    /// Sub-claims with repeated claim evidence and sub-claim labels.
    pub fn default_sre() -> Self {
        Self::parse(include_str!("../../templates/sre.txt")).expect("shipped template parses")
    }

    /// Sub-claims with aligned evidence and sub-claim labels.
    pub fn default_sae() -> Self {
        Self::parse(include_str!("../../templates/sae.txt")).expect("shipped template parses")
    }

    pub fn default_subclaim() -> Self {
        Self::parse(include_str!("../../templates/subclaim.txt")).expect("shipped template parses")
    }

    pub fn default_decompose() -> Self {
        Self::parse(include_str!("../../templates/decompose.txt")).expect("shipped template parses")
    }
}

/// One template per claim-level configuration.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub vanilla: PromptTemplate,
    pub sre: PromptTemplate,
    pub sae: PromptTemplate,
    pub abl_sre: PromptTemplate,
    pub abl_sae: PromptTemplate,
}

impl Default for TemplateSet {
    /// Ablations render with the SRE-style template, whose guidelines do not
    /// refer to sub-claim labels being present.
    fn default() -> Self {
        Self {
            vanilla: PromptTemplate::default_vanilla(),
            sre: PromptTemplate::default_sre(),
            sae: PromptTemplate::default_sae(),
            abl_sre: PromptTemplate::default_sre(),
            abl_sae: PromptTemplate::default_sre(),
        }
    }
}

impl TemplateSet {
    pub fn for_configuration(&self, configuration: EvidenceConfiguration) -> &PromptTemplate {
        match configuration {
            EvidenceConfiguration::Vanilla => &self.vanilla,
            EvidenceConfiguration::Sre => &self.sre,
            EvidenceConfiguration::Sae => &self.sae,
            EvidenceConfiguration::AblSre => &self.abl_sre,
            EvidenceConfiguration::AblSae => &self.abl_sae,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_parse() {
        let v = PromptTemplate::default_vanilla();
        assert_eq!(v.family, TemplateFamily::Vanilla);
        assert_eq!(v.claim.open, "<|Claim start|>");
        assert_eq!(v.claim.close, "<|Claim end|>");
        assert!(v.preamble.starts_with("You are a journalist"));
        assert!(v.footer.ends_with("Veracity: T/F."));

        let sae = PromptTemplate::default_sae();
        assert_eq!(sae.subclaim.open, "<[Sub-claim start]>");
        assert!(sae
            .preamble
            .contains("Do not blindly trust sub-claim veracity labels"));
        let sre = PromptTemplate::default_sre();
        assert_eq!(sre.subclaim.open, "<[Subclaim start]>");
        assert_ne!(sre.hash, sae.hash);
        PromptTemplate::default_subclaim();
        PromptTemplate::default_decompose();
    }

    #[test]
    fn wrapper_requires_one_placeholder() {
        let src = PromptTemplate::default_sre_source().replace("<[Evidence start]>{text}", "<[Evidence start]>");
        assert!(matches!(PromptTemplate::parse(&src), Err(TemplateError::BadWrapper("evidence"))));
    }

    #[test]
    fn missing_and_unknown_sections() {
        let src = PromptTemplate::default_sre_source().replace("@@footer", "@@bogus");
        assert!(matches!(PromptTemplate::parse(&src), Err(TemplateError::UnknownSection(_))));
        let src: String = PromptTemplate::default_sre_source()
            .split("@@footer")
            .next()
            .unwrap()
            .to_string();
        assert!(matches!(PromptTemplate::parse(&src), Err(TemplateError::MissingSection("footer"))));
    }

    impl PromptTemplate {
        fn default_sre_source() -> &'static str {
            include_str!("../../templates/sre.txt")
        }
    }
}

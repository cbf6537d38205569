//! Prompt templates for the two generation stages.

use serde::{Deserialize, Serialize};

const DATA_SYSTEM: &str = include_str!("../prompts/data_system.txt");
const IMAGE_SYSTEM: &str = include_str!("../prompts/image_system.txt");

pub const DATA_OPEN: &str = "<data>";
pub const DATA_CLOSE: &str = "</data>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Imitate a seed table as a new CSV label.
    Data,
    /// Write a plotting script for a label.
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub stage: Stage,
    pub system_text: String,
}

impl PromptTemplate {
    pub fn data() -> Self {
        PromptTemplate { stage: Stage::Data, system_text: DATA_SYSTEM.to_string() }
    }

    pub fn image() -> Self {
        PromptTemplate { stage: Stage::Image, system_text: IMAGE_SYSTEM.to_string() }
    }

    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::Data => Self::data(),
            Stage::Image => Self::image(),
        }
    }

    /// The user message carrying `data` between the slot delimiters.
    pub fn user_message(&self, data: &str) -> String {
        format!("The data is {DATA_OPEN} {data} {DATA_CLOSE}")
    }
}

/// Removes a surrounding Markdown code fence (and its language tag) if the
/// whole response is wrapped in one, then trims.
pub fn strip_code_fences(response: &str) -> &str {
    let trimmed = response.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let body = match rest.find('\n') {
        Some(i) => &rest[i + 1..],
        // a single-line fence has no body
        None => return "",
    };
    body.strip_suffix("```").unwrap_or(body).trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn user_message_slot() {
        let t = PromptTemplate::data();
        assert_eq!(t.user_message("none,A\nx,1"), "The data is <data> none,A\nx,1 </data>");
    }

    #[test]
    fn fences() {
        assert_eq!(strip_code_fences("x = 1\n"), "x = 1");
        assert_eq!(strip_code_fences("```python\nx = 1\n```"), "x = 1");
        assert_eq!(strip_code_fences("```\nnone,A\nx,1\n```\n"), "none,A\nx,1");
        assert_eq!(strip_code_fences("  ```csv\na,b\n"), "a,b");
        assert_eq!(strip_code_fences("```"), "");
    }
}

/// A task prompt: descriptive preamble, requirement lines, and a code
/// skeleton with `{Parent1}` / `{Parent2}` slots for the parent bodies,
/// ending in the open v2 definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub preamble: String,
    pub requirements: String,
    /// v0, v1, v2 function names.
    pub function_names: [String; 3],
    pub skeleton: String,
}

const SLOT1: &str = "{Parent1}";
const SLOT2: &str = "{Parent2}";
const BODY_INDENT: &str = "  ";

impl PromptTemplate {
    /// Parses `preamble %% requirements %% skeleton` text.
    pub fn from_text(text: &str, function_names: [&str; 3]) -> Result<Self, String> {
        let parts: Vec<&str> = text.split("\n%%\n").collect();
        let [preamble, requirements, skeleton] = parts[..] else {
            return Err(format!("expected 3 sections separated by %%, found {}", parts.len()));
        };
        let t = Self {
            preamble: preamble.trim_end().to_string(),
            requirements: requirements.trim_end().to_string(),
            function_names: function_names.map(String::from),
            skeleton: skeleton.trim_end().to_string(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), String> {
        let one = self.skeleton.find(SLOT1).ok_or("skeleton lacks {Parent1}")?;
        let two = self.skeleton.find(SLOT2).ok_or("skeleton lacks {Parent2}")?;
        if self.skeleton.matches(SLOT1).count() != 1 || self.skeleton.matches(SLOT2).count() != 1 || one > two {
            return Err("skeleton needs exactly one {Parent1} followed by one {Parent2}".into());
        }
        let stub = format!("def {}(", self.function_names[2]);
        if self.skeleton.matches(&stub).count() != 1 {
            return Err(format!("skeleton must define {} exactly once", self.function_names[2]));
        }
        Ok(())
    }

    /// Built-in template for `obp`, `capset` or `tsp`.
    pub fn builtin(task: &str) -> Option<Self> {
        let (text, names) = match task {
            "obp" => (include_str!("templates/obp.txt"), ["priority_v0", "priority_v1", "priority_v2"]),
            "capset" => (include_str!("templates/capset.txt"), ["priority_v0", "priority_v1", "priority_v2"]),
            "tsp" => (
                include_str!("templates/tsp.txt"),
                ["update_dist_v0", "update_dist_v1", "update_dist_v2"],
            ),
            _ => return None,
        };
        Some(Self::from_text(text, names).expect("built-in templates are well formed"))
    }

    pub fn v2_name(&self) -> &str {
        &self.function_names[2]
    }

    /// Full prompt text with `v0` and `v1` bodies placed in their slots.
    pub fn render(&self, v0_body: &str, v1_body: &str) -> String {
        let (head, rest) = self.skeleton.split_once(SLOT1).expect("validated");
        let (middle, tail) = rest.split_once(SLOT2).expect("validated");
        let mut out = String::with_capacity(self.skeleton.len() + v0_body.len() + v1_body.len() + 512);
        out.push_str(&self.preamble);
        out.push_str("\n\n");
        out.push_str(&self.requirements);
        out.push_str("\n\n");
        out.push_str(head);
        out.push_str(&indent_body(v0_body));
        out.push_str(middle);
        out.push_str(&indent_body(v1_body));
        out.push_str(tail);
        out.push('\n');
        out
    }
}

/// Indents every non-blank line of a dedented function body.
pub fn indent_body(body: &str) -> String {
    body.trim_end_matches('\n')
        .lines()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                format!("{BODY_INDENT}{l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for task in ["obp", "capset", "tsp"] {
            let t = PromptTemplate::builtin(task).unwrap();
            assert!(t.requirements.contains(&format!("complete the \"{}\" function", t.v2_name())));
        }
        assert!(PromptTemplate::builtin("nope").is_none());
    }

    #[test]
    fn bodies_appear_once_each() {
        let t = PromptTemplate::builtin("obp").unwrap();
        let p = t.render("return bins - item", "return -bins");
        assert_eq!(p.matches("  return bins - item\n").count(), 1);
        assert_eq!(p.matches("  return -bins\n").count(), 1);
        assert_eq!(p.matches("def priority_v2(").count(), 1);
        assert!(p.contains("Online 1D bin packing"));
        assert!(p.contains("Here are the requirements:"));
        assert!(p.ends_with("\"\"\" Improved version of priority_v1 \"\"\"\n"));
    }

    #[test]
    fn swapping_parents_swaps_only_slots() {
        let t = PromptTemplate::builtin("tsp").unwrap();
        let a = t.render("return A", "return B");
        let b = t.render("return B", "return A");
        assert_eq!(a.len(), b.len());
        assert_eq!(a.replace("return A", "X").replace("return B", "Y"), b.replace("return B", "X").replace("return A", "Y"));
        assert_ne!(a, b);
    }

    #[test]
    fn slot_text_inside_a_body_is_not_expanded() {
        let t = PromptTemplate::builtin("capset").unwrap();
        let p = t.render("return '{Parent2}'", "return 1");
        assert!(p.contains("  return '{Parent2}'"));
        assert!(p.contains("  return 1"));
    }

    #[test]
    fn malformed_templates() {
        assert!(PromptTemplate::from_text("a\n%%\nb", ["a", "b", "c"]).is_err());
        assert!(PromptTemplate::from_text("a\n%%\nb\n%%\n{Parent2}{Parent1} def c(", ["a", "b", "c"]).is_err());
        assert!(PromptTemplate::from_text("a\n%%\nb\n%%\n{Parent1}{Parent2}", ["a", "b", "c"]).is_err());
    }
}

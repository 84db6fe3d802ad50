use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no definition of `{0}` found")]
    Missing(String),
    #[error("definition of `{0}` has an empty body")]
    EmptyBody(String),
}

fn indentation(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

/// First fenced code block of `response`, or the whole text without one.
fn code_region(response: &str) -> &str {
    let Some(open) = response.find("```") else {
        return response;
    };
    let after = &response[open + 3..];
    // skip the language tag on the fence line
    let body = match after.find('\n') {
        Some(nl) => &after[nl + 1..],
        None => "",
    };
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Pulls the body of `def <v2_name>(...)` out of a model response, dedented,
/// without a leading docstring and without anything defined after it.
pub fn extract_function(response: &str, v2_name: &str) -> Result<String, ExtractError> {
    let code = code_region(response);
    let lines: Vec<&str> = code.lines().collect();
    let header = format!("def {v2_name}(");
    let start = lines
        .iter()
        .position(|l| l.trim_start().starts_with(&header))
        .ok_or_else(|| ExtractError::Missing(v2_name.to_string()))?;
    let def_indent = indentation(lines[start]);

    // the signature may span several lines; the body starts after the colon
    let mut first = start;
    while first < lines.len() && !lines[first].trim_end().ends_with(':') {
        first += 1;
    }
    let mut body: Vec<&str> = Vec::new();
    for l in lines.iter().skip(first + 1) {
        if !l.trim().is_empty() && indentation(l) <= def_indent {
            break;
        }
        body.push(l);
    }
    while body.last().is_some_and(|l| l.trim().is_empty()) {
        body.pop();
    }
    let min_indent = body
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indentation(l))
        .min()
        .unwrap_or(0);
    let mut dedented: Vec<String> = body
        .iter()
        .map(|l| if l.trim().is_empty() { String::new() } else { l[min_indent..].to_string() })
        .collect();
    strip_docstring(&mut dedented);
    while dedented.first().is_some_and(|l| l.trim().is_empty()) {
        dedented.remove(0);
    }
    if dedented.is_empty() {
        return Err(ExtractError::EmptyBody(v2_name.to_string()));
    }
    Ok(dedented.join("\n"))
}

fn strip_docstring(lines: &mut Vec<String>) {
    let Some(first) = lines.iter().position(|l| !l.trim().is_empty()) else {
        return;
    };
    let head = lines[first].trim_start();
    let Some(quote) = ["\"\"\"", "'''"].into_iter().find(|q| head.starts_with(q)) else {
        return;
    };
    let rest = &head[3..];
    let end = if rest.contains(quote) {
        first
    } else {
        match lines.iter().skip(first + 1).position(|l| l.contains(quote)) {
            Some(off) => first + 1 + off,
            None => return,
        }
    };
    lines.drain(..=end);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block() {
        let r = "Sure!\n```python\ndef priority_v2(item, bins):\n    \"\"\"Better.\"\"\"\n    x = bins - item\n    return -x\n```\nHope it helps.";
        assert_eq!(extract_function(r, "priority_v2").unwrap(), "x = bins - item\nreturn -x");
    }

    #[test]
    fn prose_only_fails() {
        assert_eq!(
            extract_function("I would rank bins by fullness.", "priority_v2"),
            Err(ExtractError::Missing("priority_v2".into()))
        );
    }

    #[test]
    fn trailing_helper_is_dropped() {
        let r = "def priority_v2(item: float, bins: np.ndarray) -> np.ndarray:\n  \"\"\" Improved version of priority_v1 \"\"\"\n  s = bins - item\n\n  return s\n\ndef helper(x):\n  return x\n";
        assert_eq!(extract_function(r, "priority_v2").unwrap(), "s = bins - item\n\nreturn s");
    }

    #[test]
    fn multiline_docstring_and_nested_blocks() {
        let r = "```\n    def update_dist_v2(distance_matrix ,\n                       current_route):\n        '''\n        doc\n        '''\n        for i in range(3):\n            pass\n        return distance_matrix\n```";
        assert_eq!(
            extract_function(r, "update_dist_v2").unwrap(),
            "for i in range(3):\n    pass\nreturn distance_matrix"
        );
    }

    #[test]
    fn other_versions_are_ignored() {
        let r = "def priority_v1(n):\n  return 1\ndef priority_v2(n):\n  return 2\n";
        assert_eq!(extract_function(r, "priority_v2").unwrap(), "return 2");
    }

    #[test]
    fn empty_body_fails() {
        let r = "def priority_v2(n):\n  \"\"\"only a docstring\"\"\"\n";
        assert_eq!(extract_function(r, "priority_v2"), Err(ExtractError::EmptyBody("priority_v2".into())));
    }
}

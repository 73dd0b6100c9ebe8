use crate::error::{Error, Result};

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Pulls the file payload out of a model reply.
///
/// A reply holding exactly one fenced block yields the block body with
/// leading and trailing blank lines removed; prose around the fence is
/// dropped. A reply without fences is returned unchanged. Two or more blocks
/// are ambiguous.
pub fn extract_code(raw_text: &str) -> Result<String> {
    let lines: Vec<&str> = raw_text.lines().collect();
    let fences: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| is_fence(l))
        .map(|(i, _)| i)
        .collect();
    match fences.len() {
        0 => Ok(raw_text.to_string()),
        2 => {
            let body = &lines[fences[0] + 1..fences[1]];
            let first = body.iter().position(|l| !l.trim().is_empty());
            let last = body.iter().rposition(|l| !l.trim().is_empty());
            Ok(match (first, last) {
                (Some(a), Some(b)) => body[a..=b].join("\n"),
                _ => String::new(),
            })
        }
        n if n % 2 == 0 => Err(Error::AmbiguousPayload(n / 2)),
        _ => Err(Error::Validation("unterminated code fence".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_single_fence() {
        assert_eq!(extract_code("```js\nlet a=1;\n```").unwrap(), "let a=1;");
        assert_eq!(
            extract_code("Here you go:\n```\n\nx\n  y\n\n```\nThanks").unwrap(),
            "x\n  y"
        );
    }

    #[test]
    fn bare_text_unchanged() {
        let text = "line one\nline two\n";
        assert_eq!(extract_code(text).unwrap(), text);
    }

    #[test]
    fn two_blocks_are_ambiguous() {
        let err = extract_code("```\na\n```\ntext\n```\nb\n```\n").unwrap_err();
        assert!(matches!(err, Error::AmbiguousPayload(2)));
        assert!(err.to_string().contains("ambiguous code payload"));
    }

    #[test]
    fn unterminated_fence_rejected() {
        assert!(extract_code("```js\nlet a = 1;\n").is_err());
    }

    proptest! {
        #[test]
        fn idempotent(body in "[a-z `\n]{0,60}", fenced in any::<bool>()) {
            let raw = if fenced { format!("```txt\n{body}\n```\n") } else { body };
            if let Ok(once) = extract_code(&raw) {
                prop_assert_eq!(extract_code(&once).unwrap(), once);
            }
        }
    }
}

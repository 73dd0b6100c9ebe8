use std::path::Path;

/// Tag used when the extension is unknown.
pub const UNKNOWN_LANGUAGE: &str = "code";

const EXTENSIONS: &[(&str, &str)] = &[
    ("c", "c"),
    ("cc", "cpp"),
    ("cpp", "cpp"),
    ("cs", "csharp"),
    ("css", "css"),
    ("go", "go"),
    ("h", "c"),
    ("hpp", "cpp"),
    ("html", "html"),
    ("java", "java"),
    ("js", "javascript"),
    ("json", "json"),
    ("jsx", "jsx"),
    ("kt", "kotlin"),
    ("mjs", "javascript"),
    ("php", "php"),
    ("py", "python"),
    ("rb", "ruby"),
    ("rs", "rust"),
    ("scss", "scss"),
    ("sh", "shell"),
    ("sql", "sql"),
    ("swift", "swift"),
    ("ts", "typescript"),
    ("tsx", "tsx"),
    ("xml", "xml"),
    ("yaml", "yaml"),
    ("yml", "yaml"),
];

/// Language tag for a file path, by extension.
pub fn language_tag(path: &str) -> &'static str {
    let ext = Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    ext.and_then(|ext| {
        EXTENSIONS
            .binary_search_by(|(k, _)| k.cmp(&ext.as_str()))
            .ok()
            .map(|i| EXTENSIONS[i].1)
    })
    .unwrap_or(UNKNOWN_LANGUAGE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_sorted() {
        assert!(EXTENSIONS.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn known_and_unknown() {
        assert_eq!(language_tag("client/src/vehicleMarkers.jsx"), "jsx");
        assert_eq!(language_tag("deploy/deployment.YAML"), "yaml");
        assert_eq!(language_tag("Makefile"), UNKNOWN_LANGUAGE);
        assert_eq!(language_tag("x.weird"), UNKNOWN_LANGUAGE);
    }
}

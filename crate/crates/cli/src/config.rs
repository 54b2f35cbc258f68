//! Flat key-value config files with one section per subcommand, and the
//! flag > environment > file > default resolution order. Parse errors
//! carry line numbers so a broken config points at itself.

use std::collections::BTreeMap;
use std::path::Path;

/// Parsed config: section name -> key -> (line number, raw value).
/// Keys before the first section header live in the "" section and hold
/// the global options (seed, workers, out, format).
#[derive(Debug, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl ConfigFile {
    pub fn empty() -> ConfigFile {
        ConfigFile::default()
    }

    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        ConfigFile::parse(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    format!("line {line_no}: unterminated section header {raw:?}")
                })?;
                current = name.trim().to_string();
                if current.is_empty() {
                    return Err(format!("line {line_no}: empty section name"));
                }
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "line {line_no}: expected 'key = value' or '[section]', found {raw:?}"
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(format!("line {line_no}: missing key before '='"));
            }
            let section = sections.entry(current.clone()).or_default();
            if let Some((first, _)) = section.get(key) {
                return Err(format!(
                    "line {line_no}: duplicate key {key:?} (first set at line {first})"
                ));
            }
            section.insert(key.to_string(), (line_no, value.to_string()));
        }
        Ok(ConfigFile { sections })
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Section<'a> {
        Section { name, entries: self.sections.get(name) }
    }

    /// Global options live before the first section header.
    pub fn globals(&self) -> Section<'_> {
        Section { name: "global", entries: self.sections.get("") }
    }
}

/// Typed accessors for one section's keys. Every error names the line,
/// section, and field.
#[derive(Clone, Copy)]
pub struct Section<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, (usize, String)>>,
}

impl<'a> Section<'a> {
    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.entries.and_then(|m| m.get(key)).map(|(_, v)| v.as_str())
    }

    fn parsed<T, F>(&self, key: &str, what: &str, parse: F) -> Result<Option<T>, String>
    where
        F: Fn(&str) -> Option<T>,
    {
        match self.entries.and_then(|m| m.get(key)) {
            None => Ok(None),
            Some((line, value)) => parse(value).map(Some).ok_or_else(|| {
                format!(
                    "line {line}: [{}] {key}: expected {what}, found {value:?}",
                    self.name
                )
            }),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        self.parsed(key, "a number", |v| v.parse().ok().filter(|x: &f64| x.is_finite()))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, String> {
        self.parsed(key, "an unsigned integer", |v| v.parse().ok())
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        self.parsed(key, "an unsigned integer", |v| v.parse().ok())
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    /// Comma-separated list, entries trimmed, empty entries rejected.
    pub fn list(&self, key: &str) -> Result<Option<Vec<String>>, String> {
        self.parsed(key, "a comma-separated list", |v| {
            let items: Vec<String> =
                v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            if items.is_empty() {
                None
            } else {
                Some(items)
            }
        })
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        self.parsed(key, "a comma-separated list of numbers", |v| {
            let mut out = Vec::new();
            for item in v.split(',') {
                out.push(item.trim().parse().ok().filter(|x: &f64| x.is_finite())?);
            }
            if out.is_empty() {
                None
            } else {
                Some(out)
            }
        })
    }
}

/// flag > config file > default
pub fn resolve<T>(flag: Option<T>, file: Result<Option<T>, String>, default: T) -> Result<T, String> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(file?.unwrap_or(default)),
    }
}

/// A manifest is itself a valid config file: global keys, then one
/// section holding the command's fully-resolved parameters, keys sorted.
pub fn manifest_text(
    command: &str,
    globals: &BTreeMap<String, String>,
    params: &BTreeMap<String, String>,
) -> String {
    let mut out = String::from("# sskcw manifest v1\n");
    out.push_str(&format!("command = {command}\n"));
    for (k, v) in globals {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str(&format!("[{command}]\n"));
    for (k, v) in params {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_values() {
        let text = "\
seed = 7          # global
[experiment]
n = 400
j = 2.0
observables = chi, partial_ls:g
[density]
b_list = -1, 0, 1
";
        let cfg = ConfigFile::parse(text).unwrap();
        assert_eq!(cfg.globals().u64("seed").unwrap(), Some(7));
        let exp = cfg.section("experiment");
        assert_eq!(exp.usize("n").unwrap(), Some(400));
        assert_eq!(exp.f64("j").unwrap(), Some(2.0));
        assert_eq!(
            exp.list("observables").unwrap().unwrap(),
            vec!["chi".to_string(), "partial_ls:g".to_string()]
        );
        assert_eq!(cfg.section("density").f64_list("b_list").unwrap().unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(cfg.section("missing").f64("j").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_and_field() {
        let err = ConfigFile::parse("[experiment]\nn = abc\n")
            .unwrap()
            .section("experiment")
            .usize("n")
            .unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("[experiment] n"), "{err}");
        assert!(err.contains("abc"), "{err}");

        let err = ConfigFile::parse("just some text\n").unwrap_err();
        assert!(err.contains("line 1"), "{err}");

        let err = ConfigFile::parse("[experiment]\nn = 1\nn = 2\n").unwrap_err();
        assert!(err.contains("line 3") && err.contains("line 2"), "{err}");

        let err = ConfigFile::parse("[oops\n").unwrap_err();
        assert!(err.contains("unterminated"), "{err}");
    }

    #[test]
    fn resolution_order_is_flag_file_default() {
        let cfg = ConfigFile::parse("[predict]\nj = 3.0\n").unwrap();
        let file = cfg.section("predict");
        assert_eq!(resolve(Some(4.0), file.f64("j"), 2.0).unwrap(), 4.0);
        assert_eq!(resolve(None, file.f64("j"), 2.0).unwrap(), 3.0);
        assert_eq!(resolve(None, file.f64("missing"), 2.0).unwrap(), 2.0);
    }

    #[test]
    fn manifests_round_trip_through_the_parser() {
        let mut globals = BTreeMap::new();
        globals.insert("out".to_string(), "runs".to_string());
        let mut params = BTreeMap::new();
        params.insert("j".to_string(), "2".to_string());
        params.insert("b_list".to_string(), "-1, 0, 1".to_string());
        let text = manifest_text("density", &globals, &params);
        let cfg = ConfigFile::parse(&text).unwrap();
        assert_eq!(cfg.globals().string("out"), Some("runs".to_string()));
        assert_eq!(cfg.globals().string("command"), Some("density".to_string()));
        assert_eq!(cfg.section("density").f64_list("b_list").unwrap().unwrap(), vec![-1.0, 0.0, 1.0]);
    }
}

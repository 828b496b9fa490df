//! The flat key-value report document shared by certification, QRNG budget,
//! and protocol outputs. Reports render as `key = value` text lines and as
//! JSON via serde on the owning types.

/// Ordered key-value pairs destined for a report file.
#[derive(Debug, Clone, Default)]
pub struct Kv {
    entries: Vec<(String, String)>,
}

impl Kv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Render as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

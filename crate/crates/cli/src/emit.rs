//! CSV and JSON rendering with stable schemas. Floating-point values are
//! serialized with 17 significant digits so identical runs produce
//! byte-identical artifacts that round-trip through f64 exactly.

/// `{:.16e}` carries one leading digit plus 16 decimals: 17 significant
/// digits, enough to reproduce any f64 bit pattern on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Incremental JSON writer for the fixed, flat-ish schemas emitted here.
pub struct JsonObject {
    buf: String,
    first: bool,
}

impl JsonObject {
    pub fn new() -> Self {
        Self {
            buf: String::from("{"),
            first: true,
        }
    }

    fn key(&mut self, key: &str) {
        if !self.first {
            self.buf.push(',');
        }
        self.first = false;
        self.buf.push('"');
        self.buf.push_str(&json_escape(key));
        self.buf.push_str("\":");
    }

    pub fn field_str(mut self, key: &str, value: &str) -> Self {
        self.key(key);
        self.buf.push('"');
        self.buf.push_str(&json_escape(value));
        self.buf.push('"');
        self
    }

    pub fn field_f64(mut self, key: &str, value: f64) -> Self {
        self.key(key);
        self.buf.push_str(&fmt_f64(value));
        self
    }

    pub fn field_opt_f64(mut self, key: &str, value: Option<f64>) -> Self {
        self.key(key);
        match value {
            Some(v) => self.buf.push_str(&fmt_f64(v)),
            None => self.buf.push_str("null"),
        }
        self
    }

    pub fn field_u64(mut self, key: &str, value: u64) -> Self {
        self.key(key);
        self.buf.push_str(&value.to_string());
        self
    }

    pub fn field_bool(mut self, key: &str, value: bool) -> Self {
        self.key(key);
        self.buf.push_str(if value { "true" } else { "false" });
        self
    }

    pub fn field_raw(mut self, key: &str, raw: &str) -> Self {
        self.key(key);
        self.buf.push_str(raw);
        self
    }

    pub fn field_array(mut self, key: &str, items: impl IntoIterator<Item = String>) -> Self {
        self.key(key);
        self.buf.push('[');
        for (i, item) in items.into_iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            self.buf.push_str(&item);
        }
        self.buf.push(']');
        self
    }

    pub fn finish(mut self) -> String {
        self.buf.push('}');
        self.buf
    }
}

impl Default for JsonObject {
    fn default() -> Self {
        Self::new()
    }
}

/// Joins one CSV record; fields here never contain commas or quotes.
pub fn csv_row(fields: &[String]) -> String {
    fields.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_digits_and_lossless() {
        for &x in &[
            0.0,
            1.0,
            -1.0 / 3.0,
            2.875,
            1e-300,
            f64::MAX,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn json_object_renders_valid_json() {
        let s = JsonObject::new()
            .field_str("name", "a\"b")
            .field_f64("x", 0.25)
            .field_u64("n", 7)
            .field_bool("ok", true)
            .field_opt_f64("missing", None)
            .finish();
        assert_eq!(
            s,
            "{\"name\":\"a\\\"b\",\"x\":2.5000000000000000e-1,\"n\":7,\"ok\":true,\"missing\":null}"
        );
    }
}

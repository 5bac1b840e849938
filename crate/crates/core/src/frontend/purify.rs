//! Source purification: rewrites the legacy inlined-C idiom
//! `self cCode: 'fn(args)'` into the VM-call construct. Everything else is
//! passed through byte-for-byte.

use super::FrontendError;

/// The fixed substitution table: function name -> expected argument count.
/// Only calls of these shapes have a rewrite; anything else inside a
/// `cCode:` payload is rejected.
pub const CCODE_TABLE: &[(&str, usize)] = &[
    ("printOop", 1),
    ("primitiveNew", 0),
    ("createDirectory", 1),
    ("fileWrite", 2),
    ("fileRead", 1),
    ("emitHexDigit", 1),
];

pub fn purify(source: &str) -> Result<String, FrontendError> {
    let bytes = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0usize;
    while i < bytes.len() {
        if let Some((consumed, replacement)) = match_ccode(&source[i..])? {
            // replace from the 'self' that precedes the idiom
            while out.ends_with(char::is_whitespace) {
                out.pop();
            }
            if out.ends_with("self") {
                out.truncate(out.len() - 4);
            }
            out.push_str(&replacement);
            i += consumed;
        } else {
            let c = source[i..].chars().next().unwrap();
            out.push(c);
            i += c.len_utf8();
        }
    }
    Ok(out)
}

/// If `rest` starts with `cCode: '...'`, parse the payload and return the
/// rewritten construct together with the number of bytes consumed.
fn match_ccode(rest: &str) -> Result<Option<(usize, String)>, FrontendError> {
    let Some(after) = rest.strip_prefix("cCode:") else {
        return Ok(None);
    };
    let trimmed = after.trim_start();
    let Some(payload_start) = trimmed.strip_prefix('\'') else {
        return Ok(None);
    };
    let Some(end) = payload_start.find('\'') else {
        return Ok(None);
    };
    let payload = &payload_start[..end];
    let consumed = rest.len() - payload_start.len() + end + 1;

    let (name, args) = parse_call_payload(payload)
        .ok_or_else(|| FrontendError::UnsupportedIdiom(payload.to_string()))?;
    let expected = CCODE_TABLE
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, arity)| *arity)
        .ok_or_else(|| FrontendError::UnsupportedIdiom(name.to_string()))?;
    if args.len() != expected {
        return Err(FrontendError::UnsupportedIdiom(name.to_string()));
    }
    let braces = if args.is_empty() {
        "{}".to_string()
    } else {
        format!("{{{}}}", args.join(". "))
    };
    Ok(Some((
        consumed,
        format!("self callVMFunction: #{name} withArguments: {braces}"),
    )))
}

/// Parse `name(a, b, c)` where the arguments are identifiers or integers.
fn parse_call_payload(payload: &str) -> Option<(String, Vec<String>)> {
    let payload = payload.trim();
    let open = payload.find('(')?;
    let name = payload[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    let close = payload.rfind(')')?;
    if close != payload.len() - 1 {
        return None;
    }
    let inner = payload[open + 1..close].trim();
    let mut args = Vec::new();
    if !inner.is_empty() {
        for piece in inner.split(',') {
            let arg = piece.trim();
            let ok = !arg.is_empty()
                && arg
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return None;
            }
            args.push(arg.to_string());
        }
    }
    Some((name.to_string(), args))
}

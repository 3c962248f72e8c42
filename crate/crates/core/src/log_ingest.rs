//! NCSA Common / Combined Log Format ingestion.
//!
//! Parsing is strict: a line is accepted only if re-emitting it in canonical
//! form reproduces the input (query strings aside), so non-canonical dates,
//! zero-padded status codes and the like are rejected rather than guessed at.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const CLF_DATE_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    #[default]
    Common,
    Combined,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "common" => Ok(LogFormat::Common),
            "combined" => Ok(LogFormat::Combined),
            other => Err(format!("unknown log format '{other}'")),
        }
    }
}

/// The field a line was rejected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Host,
    Timestamp,
    Request,
    Status,
    Bytes,
    Referer,
    UserAgent,
    Trailing,
    Encoding,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Field::Host => "host",
            Field::Timestamp => "timestamp",
            Field::Request => "request",
            Field::Status => "status",
            Field::Bytes => "bytes",
            Field::Referer => "referer",
            Field::UserAgent => "user_agent",
            Field::Trailing => "trailing",
            Field::Encoding => "encoding",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {field}: {reason}")]
pub struct ParseError {
    pub field: Field,
    pub reason: String,
}

impl ParseError {
    fn new(field: Field, reason: impl Into<String>) -> Self {
        ParseError {
            field,
            reason: reason.into(),
        }
    }
}

/// One parsed access-log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub remote_host: String,
    pub identity: Option<String>,
    pub auth_user: Option<String>,
    /// Original offset is retained; use [`LogEntry::utc`] for ordering.
    pub timestamp: DateTime<FixedOffset>,
    pub method: String,
    pub path: String,
    pub protocol: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referer: Option<String>,
    pub user_agent: Option<String>,
}

impl LogEntry {
    pub fn utc(&self) -> DateTime<Utc> {
        self.timestamp.with_timezone(&Utc)
    }

    /// The CLF bracketed date text, without brackets.
    pub fn clf_date(&self) -> String {
        self.timestamp.format(CLF_DATE_FORMAT).to_string()
    }

    /// Re-emit the entry as a canonical log line.
    pub fn to_clf(&self, format: LogFormat) -> String {
        let dash = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".to_string());
        let mut line = format!(
            "{} {} {} [{}] \"{} {} {}\" {} {}",
            self.remote_host,
            dash(&self.identity),
            dash(&self.auth_user),
            self.clf_date(),
            self.method,
            self.path,
            self.protocol,
            self.status,
            self.bytes.map_or_else(|| "-".to_string(), |b| b.to_string()),
        );
        if format == LogFormat::Combined {
            line.push_str(&format!(
                " \"{}\" \"{}\"",
                dash(&self.referer),
                dash(&self.user_agent)
            ));
        }
        line
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub parsed_count: usize,
    pub rejected_count: usize,
    /// 1-based.
    pub rejected_line_numbers: Vec<usize>,
}

fn optional(token: &str) -> Option<String> {
    if token == "-" {
        None
    } else {
        Some(token.to_string())
    }
}

/// Reads a quoted string whose opening quote has already been consumed.
/// Backslash escapes are kept verbatim. Returns the raw contents and the rest
/// of the input after the closing quote.
fn take_quoted(input: &str, field: Field) -> Result<(&str, &str), ParseError> {
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Ok((&input[..i], &input[i + 1..])),
            _ => i += 1,
        }
    }
    Err(ParseError::new(field, "unbalanced quotes"))
}

fn expect_prefix<'a>(input: &'a str, prefix: &str, field: Field) -> Result<&'a str, ParseError> {
    input
        .strip_prefix(prefix)
        .ok_or_else(|| ParseError::new(field, format!("expected '{prefix}'")))
}

fn parse_status(token: &str) -> Result<u16, ParseError> {
    let status: u16 = token
        .parse()
        .map_err(|_| ParseError::new(Field::Status, format!("not an integer: '{token}'")))?;
    if !(100..=599).contains(&status) || status.to_string() != token {
        return Err(ParseError::new(Field::Status, format!("out of range: '{token}'")));
    }
    Ok(status)
}

fn parse_bytes(token: &str) -> Result<Option<u64>, ParseError> {
    if token == "-" {
        return Ok(None);
    }
    match token.parse::<u64>() {
        Ok(n) if n.to_string() == token => Ok(Some(n)),
        _ => Err(ParseError::new(Field::Bytes, format!("not a byte count: '{token}'"))),
    }
}

/// Parse one log line (no trailing newline).
pub fn parse_line(line: &str, format: LogFormat) -> Result<LogEntry, ParseError> {
    let open = line
        .find(" [")
        .ok_or_else(|| ParseError::new(Field::Timestamp, "missing '['"))?;
    let head: Vec<&str> = line[..open].split(' ').collect();
    if head.len() != 3 || head.iter().any(|t| t.is_empty()) {
        return Err(ParseError::new(
            Field::Host,
            "expected 'host ident authuser' before the date",
        ));
    }

    let rest = &line[open + 2..];
    let close = rest
        .find(']')
        .ok_or_else(|| ParseError::new(Field::Timestamp, "unbalanced brackets"))?;
    let date_text = &rest[..close];
    let timestamp = DateTime::parse_from_str(date_text, CLF_DATE_FORMAT)
        .map_err(|e| ParseError::new(Field::Timestamp, e.to_string()))?;
    if timestamp.format(CLF_DATE_FORMAT).to_string() != date_text {
        return Err(ParseError::new(Field::Timestamp, "non-canonical date"));
    }

    let rest = expect_prefix(&rest[close + 1..], " \"", Field::Request)?;
    let (request, rest) = take_quoted(rest, Field::Request)?;
    let parts: Vec<&str> = request.split(' ').collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
        return Err(ParseError::new(
            Field::Request,
            "expected 'method path protocol'",
        ));
    }
    let path = parts[1].split('?').next().unwrap_or_default();

    let rest = expect_prefix(rest, " ", Field::Status)?;
    let (status_text, rest) = rest.split_once(' ').unwrap_or((rest, ""));
    let status = parse_status(status_text)?;

    // `rest` was split at the space following status; an absent bytes field
    // leaves it empty.
    let (bytes_text, rest) = match rest.split_once(' ') {
        Some((b, r)) => (b, Some(r)),
        None => (rest, None),
    };
    let bytes = parse_bytes(bytes_text)?;

    let (referer, user_agent) = match (format, rest) {
        (LogFormat::Common, None) => (None, None),
        (LogFormat::Common, Some(_)) => {
            return Err(ParseError::new(Field::Trailing, "unexpected trailing data"))
        }
        (LogFormat::Combined, None) => {
            return Err(ParseError::new(Field::Referer, "missing referer"))
        }
        (LogFormat::Combined, Some(rest)) => {
            let rest = expect_prefix(rest, "\"", Field::Referer)?;
            let (referer, rest) = take_quoted(rest, Field::Referer)?;
            let rest = expect_prefix(rest, " \"", Field::UserAgent)?;
            let (agent, rest) = take_quoted(rest, Field::UserAgent)?;
            if !rest.is_empty() {
                return Err(ParseError::new(Field::Trailing, "unexpected trailing data"));
            }
            (optional(referer), optional(agent))
        }
    };

    Ok(LogEntry {
        remote_host: head[0].to_string(),
        identity: optional(head[1]),
        auth_user: optional(head[2]),
        timestamp,
        method: parts[0].to_string(),
        path: path.to_string(),
        protocol: parts[2].to_string(),
        status,
        bytes,
        referer,
        user_agent,
    })
}

/// Parse many lines; malformed ones are skipped and recorded.
pub fn parse_log<I, S>(lines: I, format: LogFormat) -> (Vec<LogEntry>, IngestReport)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut entries = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in lines.into_iter().enumerate() {
        match parse_line(line.as_ref(), format) {
            Ok(entry) => {
                entries.push(entry);
                report.parsed_count += 1;
            }
            Err(_) => {
                report.rejected_count += 1;
                report.rejected_line_numbers.push(idx + 1);
            }
        }
    }
    (entries, report)
}

/// Parse raw file contents. Lines are split on `\n` with an optional `\r`
/// stripped; lines that are not valid UTF-8 are rejected.
pub fn parse_log_bytes(data: &[u8], format: LogFormat) -> (Vec<LogEntry>, IngestReport) {
    let mut entries = Vec::new();
    let mut report = IngestReport::default();
    if data.is_empty() {
        return (entries, report);
    }
    let body = data.strip_suffix(b"\n").unwrap_or(data);
    for (idx, raw) in body.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let parsed = std::str::from_utf8(raw)
            .map_err(|_| ParseError::new(Field::Encoding, "invalid UTF-8"))
            .and_then(|line| parse_line(line, format));
        match parsed {
            Ok(entry) => {
                entries.push(entry);
                report.parsed_count += 1;
            }
            Err(_) => {
                report.rejected_count += 1;
                report.rejected_line_numbers.push(idx + 1);
            }
        }
    }
    (entries, report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub allowed_methods: BTreeSet<String>,
    pub allowed_statuses: BTreeSet<u16>,
    /// Matched case-insensitively against the end of the path.
    pub excluded_path_suffixes: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            allowed_methods: ["GET".to_string()].into_iter().collect(),
            allowed_statuses: [200, 304].into_iter().collect(),
            excluded_path_suffixes: [".png", ".gif", ".jpg", ".css", ".js", ".ico"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl FilterConfig {
    pub fn accepts(&self, entry: &LogEntry) -> bool {
        if !self.allowed_methods.contains(&entry.method)
            || !self.allowed_statuses.contains(&entry.status)
        {
            return false;
        }
        let path = entry.path.to_ascii_lowercase();
        !self
            .excluded_path_suffixes
            .iter()
            .any(|suffix| path.ends_with(&suffix.to_ascii_lowercase()))
    }
}

/// Keep page-view entries only, in their original order.
pub fn filter_page_views(entries: &[LogEntry], config: &FilterConfig) -> Vec<LogEntry> {
    entries
        .iter()
        .filter(|e| config.accepts(e))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const APACHE_EXAMPLE: &str =
        r#"127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326"#;

    #[test]
    fn parses_canonical_common_line() {
        let e = parse_line(APACHE_EXAMPLE, LogFormat::Common).unwrap();
        assert_eq!(e.remote_host, "127.0.0.1");
        assert_eq!(e.identity, None);
        assert_eq!(e.auth_user.as_deref(), Some("frank"));
        assert_eq!(e.method, "GET");
        assert_eq!(e.path, "/apache_pb.gif");
        assert_eq!(e.protocol, "HTTP/1.0");
        assert_eq!(e.status, 200);
        assert_eq!(e.bytes, Some(2326));
        assert_eq!(e.clf_date(), "10/Oct/2000:13:55:36 -0700");
        assert_eq!(e.utc().to_rfc3339(), "2000-10-10T20:55:36+00:00");
        assert_eq!(e.to_clf(LogFormat::Common), APACHE_EXAMPLE);
    }

    #[test]
    fn strips_query_and_maps_dash_bytes() {
        let e = parse_line(
            r#"h - - [01/Jan/2020:00:00:00 +0000] "GET /a?x=1 HTTP/1.1" 200 -"#,
            LogFormat::Common,
        )
        .unwrap();
        assert_eq!(e.path, "/a");
        assert_eq!(e.bytes, None);
        assert_eq!(e.identity, None);
        assert_eq!(e.auth_user, None);
    }

    #[test]
    fn garbage_is_rejected_on_host_or_date() {
        let err = parse_line("garbage line", LogFormat::Common).unwrap_err();
        assert!(matches!(err.field, Field::Host | Field::Timestamp));
    }

    #[test]
    fn combined_line_with_escaped_quote() {
        let line = r#"10.0.0.1 - - [05/Mar/2021:07:08:09 +0130] "GET /x HTTP/1.1" 304 0 "http://r/\"q\"" "Mozilla/5.0 (X11)""#;
        let e = parse_line(line, LogFormat::Combined).unwrap();
        assert_eq!(e.referer.as_deref(), Some(r#"http://r/\"q\""#));
        assert_eq!(e.user_agent.as_deref(), Some("Mozilla/5.0 (X11)"));
        assert_eq!(e.to_clf(LogFormat::Combined), line);

        let dashed = r#"10.0.0.1 - - [05/Mar/2021:07:08:09 +0130] "GET /x HTTP/1.1" 304 0 "-" "-""#;
        let e = parse_line(dashed, LogFormat::Combined).unwrap();
        assert_eq!((e.referer, e.user_agent), (None, None));
    }

    #[test]
    fn error_fields_are_named() {
        let cases = [
            (r#"h - - [32/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 1"#, Field::Timestamp),
            (r#"h - - [1/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 1"#, Field::Timestamp),
            (r#"h - - [01/Jan/2020:00:00:00 +0000 "GET / HTTP/1.1" 200 1"#, Field::Timestamp),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1 200 1"#, Field::Request),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET /" 200 1"#, Field::Request),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" OK 1"#, Field::Status),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 700 1"#, Field::Status),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 0200 1"#, Field::Status),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 -3"#, Field::Bytes),
            (r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 1 x"#, Field::Trailing),
            (r#"h - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 1"#, Field::Host),
        ];
        for (line, field) in cases {
            let err = parse_line(line, LogFormat::Common).unwrap_err();
            assert_eq!(err.field, field, "{line}");
        }
        let err = parse_line(
            r#"h - - [01/Jan/2020:00:00:00 +0000] "GET / HTTP/1.1" 200 1 "ref"#,
            LogFormat::Combined,
        )
        .unwrap_err();
        assert_eq!(err.field, Field::Referer);
    }

    #[test]
    fn parse_log_counts_and_records_rejects() {
        let good = r#"h - - [01/Jan/2020:00:00:00 +0000] "GET /a HTTP/1.1" 200 5"#;
        let (entries, report) = parse_log([good, good, good], LogFormat::Common);
        assert_eq!(entries.len(), 3);
        assert_eq!(report.rejected_count, 0);

        let (entries, report) = parse_log([good, "bad", good], LogFormat::Common);
        assert_eq!(entries.len(), 2);
        assert_eq!(report.rejected_count, 1);
        assert_eq!(report.rejected_line_numbers, vec![2]);

        let (entries, report) = parse_log(Vec::<String>::new(), LogFormat::Common);
        assert!(entries.is_empty());
        assert_eq!(report, IngestReport::default());
    }

    #[test]
    fn parse_log_bytes_handles_crlf_and_invalid_utf8() {
        let mut data = Vec::new();
        data.extend_from_slice(
            b"h - - [01/Jan/2020:00:00:00 +0000] \"GET /a HTTP/1.1\" 200 5\r\n",
        );
        data.extend_from_slice(b"\xff\xfe\n");
        data.extend_from_slice(b"h - - [01/Jan/2020:00:00:01 +0000] \"GET /b HTTP/1.1\" 200 5\n");
        let (entries, report) = parse_log_bytes(&data, LogFormat::Common);
        assert_eq!(entries.len(), 2);
        assert_eq!(report.rejected_line_numbers, vec![2]);
        assert_eq!(parse_log_bytes(b"", LogFormat::Common).1.parsed_count, 0);
    }

    fn entry(method: &str, path: &str, status: u16) -> LogEntry {
        parse_line(
            &format!(r#"h - - [01/Jan/2020:00:00:00 +0000] "{method} {path} HTTP/1.1" {status} 1"#),
            LogFormat::Common,
        )
        .unwrap()
    }

    #[test]
    fn default_filter_rules() {
        let config = FilterConfig::default();
        let entries = vec![
            entry("GET", "/a.html", 200),
            entry("GET", "/logo.png", 200),
            entry("POST", "/a", 200),
            entry("GET", "/STYLE.CSS", 200),
            entry("GET", "/b", 304),
            entry("GET", "/c", 404),
        ];
        let kept: Vec<_> = filter_page_views(&entries, &config)
            .into_iter()
            .map(|e| e.path)
            .collect();
        assert_eq!(kept, vec!["/a.html", "/b"]);
    }

    #[test]
    fn json_round_trip_keeps_offset() {
        let e = parse_line(APACHE_EXAMPLE, LogFormat::Common).unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"auth_user\":\"frank\""));
        assert!(json.contains("\"identity\":null"));
        let back: LogEntry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_clf(LogFormat::Common), APACHE_EXAMPLE);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn token() -> impl Strategy<Value = String> {
            "[A-Za-z0-9._:-]{1,12}"
        }

        prop_compose! {
            fn valid_line()(
                host in token(),
                ident in prop_oneof![Just("-".to_string()), token()],
                user in prop_oneof![Just("-".to_string()), token()],
                secs in 0i64..4_000_000_000,
                offset_min in -720i32..=840,
                method in "(GET|POST|HEAD)",
                path in "/[a-z0-9/._-]{0,20}",
                status in 100u16..600,
                bytes in prop_oneof![Just(None), (0u64..10_000_000).prop_map(Some)],
            ) -> String {
                let offset = FixedOffset::east_opt(offset_min * 60).unwrap();
                let ts = DateTime::from_timestamp(secs, 0).unwrap().with_timezone(&offset);
                format!(
                    "{host} {ident} {user} [{}] \"{method} {path} HTTP/1.1\" {status} {}",
                    ts.format(CLF_DATE_FORMAT),
                    bytes.map_or("-".to_string(), |b: u64| b.to_string())
                )
            }
        }

        proptest! {
            #[test]
            fn canonical_lines_round_trip(line in valid_line()) {
                let e = parse_line(&line, LogFormat::Common).unwrap();
                prop_assert_eq!(e.to_clf(LogFormat::Common), line);
            }

            #[test]
            fn arbitrary_bytes_never_panic(data in proptest::collection::vec(any::<u8>(), 0..400)) {
                let (_, report) = parse_log_bytes(&data, LogFormat::Combined);
                let lines = if data.is_empty() {
                    0
                } else {
                    data.strip_suffix(b"\n").unwrap_or(&data).split(|&b| b == b'\n').count()
                };
                prop_assert_eq!(report.parsed_count + report.rejected_count, lines);
            }

            #[test]
            fn filter_is_idempotent(
                specs in proptest::collection::vec(
                    ("(GET|POST)", "/[a-z]{1,5}(\\.png|\\.html|\\.JS|)", prop_oneof![Just(200u16), Just(304), Just(404)]),
                    0..30,
                )
            ) {
                let entries: Vec<LogEntry> = specs
                    .iter()
                    .map(|(m, p, s)| super::entry(m, p, *s))
                    .collect();
                let config = FilterConfig::default();
                let once = filter_page_views(&entries, &config);
                prop_assert_eq!(filter_page_views(&once, &config), once);
            }
        }
    }
}

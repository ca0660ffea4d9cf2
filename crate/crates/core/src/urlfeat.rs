//! Lexical URL feature extraction.
//!
//! Computes the string-computable subset of the tabular feature taxonomy from
//! a raw URL: length metrics, character frequencies, security indicators,
//! structural properties, word statistics and list-based deception hints.
//! Features that require fetching page content or external services are out
//! of scope here — datasets supply them.
//!
//! URL-category features deliberately *not* emitted, because they have no
//! defensible definition over the raw string alone:
//! `nb_redirection` / `nb_external_redirection` (need the HTTP redirect
//! chain), `random_domain` (needs a trained language model of domain names),
//! `path_extension` (ambiguous across datasets), `statistical_report` (needs
//! an external reputation lookup), and `domain_in_brand` /
//! `brand_in_subdomain` / `brand_in_path` (brand similarity scoring; the
//! brand lexicon ships for downstream use but no default scoring is
//! defined).
//!
//! Definitions the taxonomy leaves open, pinned here:
//! - character counts run over the full URL string as given;
//! - `nb_www`, `nb_com`, `nb_dslash` and `http_in_path` are non-overlapping
//!   substring counts;
//! - `char_repeat` is the length of the longest run of one repeated character;
//! - `abnormal_subdomain` fires when the leftmost label of a subdomained host
//!   is a "www" lookalike (all `w`s plus optional digits) other than exactly
//!   `www`;
//! - `port` flags any explicit port;
//! - word statistics use maximal alphanumeric runs, with the `_raw` variants
//!   tokenizing the full URL and `_path` the path component.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Decomposed absolute URL. The scheme defaults to `http` when absent; the
/// hostname is lowercased (IPv6 hosts keep their brackets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlParts {
    pub scheme: String,
    pub hostname: String,
    pub port: Option<u16>,
    pub path: String,
    pub query: String,
}

/// Word lists backing the list-based features. Defaults are compiled in from
/// the `lexicons/` directory; every entry is lowercase and non-empty.
#[derive(Debug, Clone)]
pub struct LexiconConfig {
    pub tld_list: HashSet<String>,
    pub shortener_list: HashSet<String>,
    pub hint_list: Vec<String>,
    pub suspicious_tld_list: HashSet<String>,
    pub brand_list: HashSet<String>,
}

/// Parse a lexicon file body: one entry per line, `#` comments and blank
/// lines ignored, entries lowercased.
pub fn parse_lexicon(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Read a lexicon list from disk.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(parse_lexicon(&std::fs::read_to_string(path)?))
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self {
            tld_list: parse_lexicon(include_str!("../lexicons/tlds.txt")).into_iter().collect(),
            shortener_list: parse_lexicon(include_str!("../lexicons/shorteners.txt"))
                .into_iter()
                .collect(),
            hint_list: parse_lexicon(include_str!("../lexicons/phish_hints.txt")),
            suspicious_tld_list: parse_lexicon(include_str!("../lexicons/suspicious_tlds.txt"))
                .into_iter()
                .collect(),
            brand_list: parse_lexicon(include_str!("../lexicons/brands.txt")).into_iter().collect(),
        }
    }
}

fn valid_scheme(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

/// RFC-3986-style decomposition, lenient about everything except an empty
/// input, an empty hostname, a malformed scheme or an unparseable port.
pub fn parse_url(url: &str) -> Result<UrlParts> {
    let trimmed = url.trim();
    if trimmed.is_empty() {
        return Err(Error::Url("empty URL".into()));
    }
    // Fragments never carry features.
    let no_fragment = match trimmed.find('#') {
        Some(i) => &trimmed[..i],
        None => trimmed,
    };

    let (scheme, rest) = match no_fragment.find("://") {
        Some(i) => {
            let s = &no_fragment[..i];
            if !valid_scheme(s) {
                return Err(Error::Url(format!("invalid scheme '{s}'")));
            }
            (s.to_lowercase(), &no_fragment[i + 3..])
        }
        None => ("http".to_string(), no_fragment),
    };

    let (authority, path_query) = match rest.find(['/', '?']) {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, ""),
    };
    let (path, query) = match path_query.find('?') {
        Some(i) => (path_query[..i].to_string(), path_query[i + 1..].to_string()),
        None => (path_query.to_string(), String::new()),
    };

    // Userinfo (anything up to the last '@') is dropped from the hostname.
    let hostport = match authority.rfind('@') {
        Some(i) => &authority[i + 1..],
        None => authority,
    };
    let (host, port_str) = if let Some(stripped) = hostport.strip_prefix('[') {
        match stripped.find(']') {
            Some(end) => {
                let host = &hostport[..end + 2];
                let after = &hostport[end + 2..];
                let port = after.strip_prefix(':').unwrap_or("");
                (host, port)
            }
            None => return Err(Error::Url("unterminated IPv6 host".into())),
        }
    } else {
        match hostport.find(':') {
            Some(i) => (&hostport[..i], &hostport[i + 1..]),
            None => (hostport, ""),
        }
    };
    if host.is_empty() {
        return Err(Error::Url(format!("no hostname in '{trimmed}'")));
    }
    let port = if port_str.is_empty() {
        None
    } else {
        Some(
            port_str
                .parse::<u16>()
                .map_err(|_| Error::Url(format!("invalid port '{port_str}'")))?,
        )
    };
    Ok(UrlParts { scheme, hostname: host.to_lowercase(), port, path, query })
}

/// Token statistics over maximal alphanumeric runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordStats {
    pub count: usize,
    pub shortest: usize,
    pub longest: usize,
    pub average: f64,
}

/// Maximal alphanumeric runs of a string.
pub fn tokens(s: &str) -> Vec<&str> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect()
}

/// Count, shortest/longest length and average length of the tokens of `s`.
/// An empty token set yields all-zero statistics.
pub fn tokenize_words(s: &str) -> WordStats {
    let toks = tokens(s);
    if toks.is_empty() {
        return WordStats { count: 0, shortest: 0, longest: 0, average: 0.0 };
    }
    let lengths: Vec<usize> = toks.iter().map(|t| t.chars().count()).collect();
    let total: usize = lengths.iter().sum();
    WordStats {
        count: toks.len(),
        shortest: *lengths.iter().min().unwrap(),
        longest: *lengths.iter().max().unwrap(),
        average: total as f64 / toks.len() as f64,
    }
}

/// The lexical feature vector. Field order matches [`UrlFeatureRow::COLUMNS`].
#[derive(Debug, Clone, PartialEq)]
pub struct UrlFeatureRow {
    pub url_length: f64,
    pub hostname_length: f64,
    pub nb_dots: f64,
    pub nb_hyphens: f64,
    pub nb_at: f64,
    pub nb_qm: f64,
    pub nb_and: f64,
    pub nb_or: f64,
    pub nb_eq: f64,
    pub nb_underscore: f64,
    pub nb_tilde: f64,
    pub nb_percent: f64,
    pub nb_slash: f64,
    pub nb_star: f64,
    pub nb_colon: f64,
    pub nb_comma: f64,
    pub nb_semicolon: f64,
    pub nb_dollar: f64,
    pub nb_space: f64,
    pub nb_www: f64,
    pub nb_com: f64,
    pub nb_dslash: f64,
    pub ip: f64,
    pub https_token: f64,
    pub punycode: f64,
    pub port: f64,
    pub tld_in_path: f64,
    pub tld_in_subdomain: f64,
    pub abnormal_subdomain: f64,
    pub nb_subdomains: f64,
    pub prefix_suffix: f64,
    pub http_in_path: f64,
    pub ratio_digits_url: f64,
    pub ratio_digits_host: f64,
    pub length_words_raw: f64,
    pub char_repeat: f64,
    pub shortest_words_raw: f64,
    pub shortest_word_host: f64,
    pub shortest_word_path: f64,
    pub longest_words_raw: f64,
    pub longest_word_host: f64,
    pub longest_word_path: f64,
    pub avg_words_raw: f64,
    pub avg_word_host: f64,
    pub avg_word_path: f64,
    pub phish_hints: f64,
    pub shortening_service: f64,
    pub suspicious_tld: f64,
}

impl UrlFeatureRow {
    /// Stable output column order of the `extract` command.
    pub const COLUMNS: [&'static str; 48] = [
        "url_length",
        "hostname_length",
        "nb_dots",
        "nb_hyphens",
        "nb_at",
        "nb_qm",
        "nb_and",
        "nb_or",
        "nb_eq",
        "nb_underscore",
        "nb_tilde",
        "nb_percent",
        "nb_slash",
        "nb_star",
        "nb_colon",
        "nb_comma",
        "nb_semicolon",
        "nb_dollar",
        "nb_space",
        "nb_www",
        "nb_com",
        "nb_dslash",
        "ip",
        "https_token",
        "punycode",
        "port",
        "tld_in_path",
        "tld_in_subdomain",
        "abnormal_subdomain",
        "nb_subdomains",
        "prefix_suffix",
        "http_in_path",
        "ratio_digits_url",
        "ratio_digits_host",
        "length_words_raw",
        "char_repeat",
        "shortest_words_raw",
        "shortest_word_host",
        "shortest_word_path",
        "longest_words_raw",
        "longest_word_host",
        "longest_word_path",
        "avg_words_raw",
        "avg_word_host",
        "avg_word_path",
        "phish_hints",
        "shortening_service",
        "suspicious_tld",
    ];

    /// Values in [`Self::COLUMNS`] order.
    pub fn values(&self) -> [f64; 48] {
        [
            self.url_length,
            self.hostname_length,
            self.nb_dots,
            self.nb_hyphens,
            self.nb_at,
            self.nb_qm,
            self.nb_and,
            self.nb_or,
            self.nb_eq,
            self.nb_underscore,
            self.nb_tilde,
            self.nb_percent,
            self.nb_slash,
            self.nb_star,
            self.nb_colon,
            self.nb_comma,
            self.nb_semicolon,
            self.nb_dollar,
            self.nb_space,
            self.nb_www,
            self.nb_com,
            self.nb_dslash,
            self.ip,
            self.https_token,
            self.punycode,
            self.port,
            self.tld_in_path,
            self.tld_in_subdomain,
            self.abnormal_subdomain,
            self.nb_subdomains,
            self.prefix_suffix,
            self.http_in_path,
            self.ratio_digits_url,
            self.ratio_digits_host,
            self.length_words_raw,
            self.char_repeat,
            self.shortest_words_raw,
            self.shortest_word_host,
            self.shortest_word_path,
            self.longest_words_raw,
            self.longest_word_host,
            self.longest_word_path,
            self.avg_words_raw,
            self.avg_word_host,
            self.avg_word_path,
            self.phish_hints,
            self.shortening_service,
            self.suspicious_tld,
        ]
    }
}

fn char_count(s: &str, c: char) -> f64 {
    s.chars().filter(|&x| x == c).count() as f64
}

fn substring_count(haystack: &str, needle: &str) -> f64 {
    if needle.is_empty() {
        return 0.0;
    }
    let mut count = 0usize;
    let mut rest = haystack;
    while let Some(i) = rest.find(needle) {
        count += 1;
        rest = &rest[i + needle.len()..];
    }
    count as f64
}

fn digit_ratio(s: &str) -> f64 {
    let len = s.chars().count();
    if len == 0 {
        return 0.0;
    }
    s.chars().filter(char::is_ascii_digit).count() as f64 / len as f64
}

fn longest_char_run(s: &str) -> f64 {
    let mut best = 0usize;
    let mut run = 0usize;
    let mut prev: Option<char> = None;
    for c in s.chars() {
        run = if prev == Some(c) { run + 1 } else { 1 };
        best = best.max(run);
        prev = Some(c);
    }
    best as f64
}

fn is_ipv4(host: &str) -> bool {
    let labels: Vec<&str> = host.split('.').collect();
    labels.len() == 4
        && labels.iter().all(|l| {
            !l.is_empty() && l.len() <= 3 && l.bytes().all(|b| b.is_ascii_digit()) && {
                l.parse::<u16>().map(|v| v <= 255).unwrap_or(false)
            }
        })
}

fn is_ip_host(host: &str) -> bool {
    host.starts_with('[') || is_ipv4(host)
}

/// Registrable-domain decomposition of a hostname: number of subdomain
/// labels, the second-level label, and the matched TLD string.
struct DomainParts {
    nb_subdomains: usize,
    sld: String,
    tld: String,
    subdomain_labels: Vec<String>,
}

fn domain_parts(host: &str, tld_list: &HashSet<String>) -> DomainParts {
    if is_ip_host(host) {
        return DomainParts {
            nb_subdomains: 0,
            sld: String::new(),
            tld: String::new(),
            subdomain_labels: vec![],
        };
    }
    let labels: Vec<&str> = host.split('.').collect();
    let n = labels.len();
    if n < 2 {
        return DomainParts {
            nb_subdomains: 0,
            sld: host.to_string(),
            tld: String::new(),
            subdomain_labels: vec![],
        };
    }
    // Longest known suffix wins, leaving at least one label for the domain.
    let mut tld_labels = 1;
    for k in (1..n).rev() {
        if tld_list.contains(&labels[n - k..].join(".")) {
            tld_labels = k;
            break;
        }
    }
    let registrable = (tld_labels + 1).min(n);
    DomainParts {
        nb_subdomains: n - registrable,
        sld: labels[n - registrable].to_string(),
        tld: labels[n - tld_labels..].join("."),
        subdomain_labels: labels[..n - registrable].iter().map(|s| s.to_string()).collect(),
    }
}

fn is_www_lookalike(label: &str) -> bool {
    if label == "www" || label.is_empty() {
        return false;
    }
    let mut chars = label.chars().peekable();
    let mut saw_w = false;
    while chars.peek() == Some(&'w') {
        chars.next();
        saw_w = true;
    }
    saw_w && chars.all(|c| c.is_ascii_digit())
}

/// Compute the lexical feature row of one URL.
pub fn extract_url_features(url: &str, lex: &LexiconConfig) -> Result<UrlFeatureRow> {
    let parts = parse_url(url)?;
    let raw = url.trim();
    let lower = raw.to_lowercase();
    let host = &parts.hostname;
    let domain = domain_parts(host, &lex.tld_list);

    let words_raw = tokenize_words(raw);
    let words_host = tokenize_words(host);
    let words_path = tokenize_words(&parts.path);

    let phish_hints: f64 = lex.hint_list.iter().map(|h| substring_count(&lower, h)).sum();
    let shortening_service = lex.shortener_list.contains(host)
        || lex.shortener_list.iter().any(|s| host.ends_with(&format!(".{s}")));
    let tld_in_path = tokens(&parts.path.to_lowercase()).iter().any(|t| lex.tld_list.contains(*t));
    let tld_in_subdomain = domain.subdomain_labels.iter().any(|l| lex.tld_list.contains(l));
    let abnormal_subdomain =
        domain.nb_subdomains >= 1 && is_www_lookalike(&domain.subdomain_labels[0]);

    Ok(UrlFeatureRow {
        url_length: raw.chars().count() as f64,
        hostname_length: host.chars().count() as f64,
        nb_dots: char_count(raw, '.'),
        nb_hyphens: char_count(raw, '-'),
        nb_at: char_count(raw, '@'),
        nb_qm: char_count(raw, '?'),
        nb_and: char_count(raw, '&'),
        nb_or: char_count(raw, '|'),
        nb_eq: char_count(raw, '='),
        nb_underscore: char_count(raw, '_'),
        nb_tilde: char_count(raw, '~'),
        nb_percent: char_count(raw, '%'),
        nb_slash: char_count(raw, '/'),
        nb_star: char_count(raw, '*'),
        nb_colon: char_count(raw, ':'),
        nb_comma: char_count(raw, ','),
        nb_semicolon: char_count(raw, ';'),
        nb_dollar: char_count(raw, '$'),
        nb_space: char_count(raw, ' '),
        nb_www: substring_count(&lower, "www"),
        nb_com: substring_count(&lower, "com"),
        nb_dslash: substring_count(raw, "//"),
        ip: is_ip_host(host) as u8 as f64,
        https_token: host.contains("https") as u8 as f64,
        punycode: host.split('.').any(|l| l.starts_with("xn--")) as u8 as f64,
        port: parts.port.is_some() as u8 as f64,
        tld_in_path: tld_in_path as u8 as f64,
        tld_in_subdomain: tld_in_subdomain as u8 as f64,
        abnormal_subdomain: abnormal_subdomain as u8 as f64,
        nb_subdomains: domain.nb_subdomains as f64,
        prefix_suffix: domain.sld.contains('-') as u8 as f64,
        http_in_path: substring_count(&parts.path.to_lowercase(), "http"),
        ratio_digits_url: digit_ratio(raw),
        ratio_digits_host: digit_ratio(host),
        length_words_raw: words_raw.count as f64,
        char_repeat: longest_char_run(raw),
        shortest_words_raw: words_raw.shortest as f64,
        shortest_word_host: words_host.shortest as f64,
        shortest_word_path: words_path.shortest as f64,
        longest_words_raw: words_raw.longest as f64,
        longest_word_host: words_host.longest as f64,
        longest_word_path: words_path.longest as f64,
        avg_words_raw: words_raw.average,
        avg_word_host: words_host.average,
        avg_word_path: words_path.average,
        phish_hints,
        shortening_service: shortening_service as u8 as f64,
        suspicious_tld: lex.suspicious_tld_list.contains(&domain.tld) as u8 as f64,
    })
}

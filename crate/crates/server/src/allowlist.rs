//! IP-based client admission.
//!
//! One pattern per line; `#` starts a comment. A pattern is `*`, a single
//! address, a CIDR block (`10.0.0.0/8`), or an IPv4 wildcard such as
//! `192.168.1.*`.

use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;

use ipnet::IpNet;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pattern {
    Any,
    Net(IpNet),
    Octets([Option<u8>; 4]),
}

impl Pattern {
    fn matches(&self, addr: IpAddr) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Net(net) => net.contains(&addr),
            Pattern::Octets(want) => match addr {
                IpAddr::V4(v4) => v4
                    .octets()
                    .iter()
                    .zip(want)
                    .all(|(got, want)| want.is_none_or(|w| w == *got)),
                IpAddr::V6(_) => false,
            },
        }
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            return Ok(Pattern::Any);
        }
        if let Ok(net) = s.parse::<IpNet>() {
            return Ok(Pattern::Net(net));
        }
        if let Ok(addr) = s.parse::<IpAddr>() {
            return Ok(Pattern::Net(IpNet::from(addr)));
        }
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() == 4 && s.contains('*') {
            let mut octets = [None; 4];
            for (slot, part) in octets.iter_mut().zip(&parts) {
                if *part != "*" {
                    *slot = Some(part.parse::<u8>().map_err(|_| format!("bad octet {part:?} in {s:?}"))?);
                }
            }
            return Ok(Pattern::Octets(octets));
        }
        Err(format!("unrecognised address pattern {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allowlist {
    patterns: Vec<Pattern>,
}

impl Allowlist {
    pub fn allow_all() -> Self {
        Allowlist {
            patterns: vec![Pattern::Any],
        }
    }

    pub fn loopback_only() -> Self {
        Allowlist::parse("127.0.0.0/8\n::1").expect("valid patterns")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let patterns = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|line| !line.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(Allowlist { patterns })
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Allowlist::parse(&text)
    }

    pub fn permits(&self, addr: IpAddr) -> bool {
        let addr = match addr {
            IpAddr::V6(v6) => v6.to_ipv4_mapped().map(IpAddr::V4).unwrap_or(addr),
            v4 => v4,
        };
        self.patterns.iter().any(|p| p.matches(addr))
    }
}

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    View,
    AddToCart,
    Transaction,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::View => "view",
            EventKind::AddToCart => "addtocart",
            EventKind::Transaction => "transaction",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "view" => Ok(EventKind::View),
            "addtocart" => Ok(EventKind::AddToCart),
            "transaction" => Ok(EventKind::Transaction),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    /// Milliseconds since the epoch.
    pub timestamp: u64,
    pub visitor_id: String,
    pub kind: EventKind,
    pub item_id: String,
}

impl RawEvent {
    pub fn new(timestamp: u64, visitor_id: &str, kind: EventKind, item_id: &str) -> Self {
        RawEvent {
            timestamp,
            visitor_id: visitor_id.to_string(),
            kind,
            item_id: item_id.to_string(),
        }
    }

    /// `timestamp,visitor_id,event,item_id`
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.timestamp, self.visitor_id, self.kind, self.item_id
        )
    }
}

/// Well-formed events in input order plus the number of lines that were rejected.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    pub events: Vec<RawEvent>,
    pub skipped: usize,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn parse_line(line: &str) -> Option<RawEvent> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    // A trailing transaction-id column is tolerated and ignored.
    if fields.len() != 4 && fields.len() != 5 {
        return None;
    }
    let timestamp = fields[0].parse::<u64>().ok()?;
    let kind = fields[2].parse::<EventKind>().ok()?;
    if fields[1].is_empty() || fields[3].is_empty() {
        return None;
    }
    Some(RawEvent {
        timestamp,
        visitor_id: fields[1].to_string(),
        kind,
        item_id: fields[3].to_string(),
    })
}

/// Parses a `timestamp,visitor_id,event,item_id` stream.
///
/// A first line whose leading field is not an integer is taken to be a header.
/// Malformed lines are skipped and counted; only read failures are fatal.
pub fn parse_events<R: BufRead>(reader: R) -> Result<EventLog> {
    let mut log = EventLog::default();
    let mut first = true;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if first {
            first = false;
            let lead = trimmed.split(',').next().unwrap_or("").trim();
            if lead.parse::<u64>().is_err() && lead.parse::<i64>().is_err() {
                continue;
            }
        }
        match parse_line(trimmed) {
            Some(ev) => log.events.push(ev),
            None => log.skipped += 1,
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_view_line() {
        let log = parse_events("1000,u1,view,i7\n".as_bytes()).unwrap();
        assert_eq!(log.events, vec![RawEvent::new(1000, "u1", EventKind::View, "i7")]);
        assert_eq!(log.skipped, 0);
    }

    #[test]
    fn empty_input() {
        let log = parse_events("".as_bytes()).unwrap();
        assert!(log.is_empty());
        assert_eq!(log.skipped, 0);
    }

    #[test]
    fn unknown_kind_is_skipped() {
        let src = "1,u1,view,i1\n2,u1,foo,i2\n3,u2,addtocart,i1\n4,u2,transaction,i1\n";
        let log = parse_events(src.as_bytes()).unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.skipped, 1);
        assert_eq!(log.events[2].kind, EventKind::Transaction);
    }

    #[test]
    fn header_and_malformed_lines() {
        let src = "timestamp,visitorid,event,itemid,transactionid\n\
                   1433221332117,257597,view,355908,\n\
                   -5,u,view,i\n\
                   12,u,view\n\
                   13,,view,i\n\
                   1433224214164,992329,transaction,248676,7\n";
        let log = parse_events(src.as_bytes()).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.skipped, 3);
        assert_eq!(log.events[0].visitor_id, "257597");
        assert_eq!(log.events[1].kind, EventKind::Transaction);
    }

    #[test]
    fn negative_timestamp_on_first_line_is_malformed_not_header() {
        let log = parse_events("-1,u,view,i\n2,u,view,i\n".as_bytes()).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.skipped, 1);
    }
}

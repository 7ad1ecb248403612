//! Packet-capture ingestion: pull DNS queries out of pcap/pcapng files, and
//! write minimal synthetic captures for round-trip testing.
//!
//! Scope is deliberately narrow: Ethernet (with 802.1Q tags), IPv4/IPv6,
//! UDP and TCP port 53, no IP fragment reassembly and no TCP stream
//! reassembly. Everything that falls outside that scope is skipped and
//! counted, never silently dropped.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pcap_parser::{create_reader, Linktype, PcapBlockOwned, PcapError};

use super::dns_wire;
use super::DnsQueryRecord;
use crate::error::{Error, Result};

/// Per-file ingestion counters, reported alongside the extracted records.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct PcapSummary {
    /// Data packets seen in the capture.
    pub packets: u64,
    /// DNS queries extracted (these became records).
    pub queries: u64,
    /// DNS responses (QR=1), filtered by design.
    pub responses: u64,
    /// Packets that were not port-53 UDP/TCP traffic.
    pub non_dns: u64,
    /// IP fragments (no reassembly performed).
    pub fragmented: u64,
    /// Port-53 TCP segments whose DNS message was incomplete.
    pub truncated: u64,
    /// Packets that should have carried DNS but failed to parse.
    pub malformed: u64,
}

impl fmt::Display for PcapSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} packets: {} queries, {} responses, {} non-DNS, {} fragmented, {} truncated, {} malformed",
            self.packets,
            self.queries,
            self.responses,
            self.non_dns,
            self.fragmented,
            self.truncated,
            self.malformed
        )
    }
}

enum Frame<'a> {
    /// UDP or TCP payload destined to/from port 53.
    Dns(&'a [u8]),
    NonDns,
    Fragmented,
    Truncated,
    Malformed,
}

/// Parse a capture file into query records. Labels are left empty — PCAPs
/// carry no ground truth; `source` tags every record (stream keys include
/// it, so separate captures never interleave).
pub fn parse_pcap(path: &Path, source: &str) -> Result<(Vec<DnsQueryRecord>, PcapSummary)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut capacity = 1usize << 17;
    let mut reader = create_reader(capacity, file).map_err(|e| Error::Pcap {
        path: path.to_path_buf(),
        message: format!("not a pcap/pcapng capture: {e}"),
    })?;

    let mut records = Vec::new();
    let mut summary = PcapSummary::default();
    // Legacy header state.
    let mut legacy_linktype = Linktype::ETHERNET;
    let mut legacy_ts_divisor = 1e6f64;
    // pcapng per-interface state: (linktype, ts units/sec, ts offset secs).
    let mut interfaces: Vec<(Linktype, u64, i64)> = Vec::new();

    loop {
        match reader.next() {
            Ok((offset, block)) => {
                match block {
                    PcapBlockOwned::LegacyHeader(hdr) => {
                        legacy_linktype = hdr.network;
                        if hdr.is_nanosecond_precision() {
                            legacy_ts_divisor = 1e9;
                        }
                    }
                    PcapBlockOwned::Legacy(pkt) => {
                        summary.packets += 1;
                        let ts = pkt.ts_sec as f64 + pkt.ts_usec as f64 / legacy_ts_divisor;
                        ingest_frame(
                            legacy_linktype,
                            pkt.data,
                            ts,
                            source,
                            &mut records,
                            &mut summary,
                        );
                    }
                    PcapBlockOwned::NG(ng) => {
                        use pcap_parser::pcapng::Block;
                        match ng {
                            Block::SectionHeader(_) => interfaces.clear(),
                            Block::InterfaceDescription(idb) => {
                                let units = idb.ts_resolution().unwrap_or(1_000_000);
                                interfaces.push((idb.linktype, units, idb.ts_offset()));
                            }
                            Block::EnhancedPacket(epb) => {
                                summary.packets += 1;
                                let (linktype, units, ts_off) = interfaces
                                    .get(epb.if_id as usize)
                                    .copied()
                                    .unwrap_or((Linktype::ETHERNET, 1_000_000, 0));
                                let raw = ((epb.ts_high as u64) << 32) | epb.ts_low as u64;
                                let ts = ts_off as f64
                                    + (raw / units) as f64
                                    + (raw % units) as f64 / units as f64;
                                let data = &epb.data[..(epb.caplen as usize).min(epb.data.len())];
                                ingest_frame(linktype, data, ts, source, &mut records, &mut summary);
                            }
                            Block::SimplePacket(spb) => {
                                summary.packets += 1;
                                let (linktype, ..) = interfaces
                                    .first()
                                    .copied()
                                    .unwrap_or((Linktype::ETHERNET, 1_000_000, 0));
                                ingest_frame(
                                    linktype,
                                    spb.data,
                                    0.0,
                                    source,
                                    &mut records,
                                    &mut summary,
                                );
                            }
                            _ => {}
                        }
                    }
                }
                reader.consume(offset);
            }
            Err(PcapError::Eof) => break,
            Err(PcapError::Incomplete(_)) => {
                if reader.reader_exhausted() {
                    // Truncated trailing packet: count it, keep what we have.
                    summary.malformed += 1;
                    break;
                }
                reader.refill().map_err(|e| Error::Pcap {
                    path: path.to_path_buf(),
                    message: format!("refill failed: {e}"),
                })?;
            }
            Err(PcapError::UnexpectedEof) => {
                summary.malformed += 1;
                break;
            }
            Err(PcapError::BufferTooSmall) => {
                capacity *= 2;
                if capacity > (1 << 26) || !reader.grow(capacity) {
                    return Err(Error::Pcap {
                        path: path.to_path_buf(),
                        message: "block too large for parser buffer".to_string(),
                    });
                }
            }
            Err(e) => {
                return Err(Error::Pcap {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((records, summary))
}

fn ingest_frame(
    linktype: Linktype,
    data: &[u8],
    ts: f64,
    source: &str,
    records: &mut Vec<DnsQueryRecord>,
    summary: &mut PcapSummary,
) {
    let frame = match linktype {
        Linktype::ETHERNET => parse_ethernet(data),
        Linktype::RAW | Linktype::IPV4 | Linktype::IPV6 => parse_ip(data),
        _ => Frame::NonDns,
    };
    match frame {
        Frame::Dns(payload) => match dns_wire::parse_message(payload) {
            Some(q) if q.is_response => summary.responses += 1,
            Some(q) => {
                summary.queries += 1;
                records.push(DnsQueryRecord {
                    timestamp: ts.max(0.0),
                    qname: q.qname,
                    qtype: dns_wire::qtype_name(q.qtype),
                    family_label: None,
                    behavior_label: None,
                    source: source.to_string(),
                });
            }
            None => summary.malformed += 1,
        },
        Frame::NonDns => summary.non_dns += 1,
        Frame::Fragmented => summary.fragmented += 1,
        Frame::Truncated => summary.truncated += 1,
        Frame::Malformed => summary.malformed += 1,
    }
}

fn parse_ethernet(frame: &[u8]) -> Frame<'_> {
    if frame.len() < 14 {
        return Frame::Malformed;
    }
    let mut ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    let mut offset = 14;
    // Peel 802.1Q / QinQ tags.
    while ethertype == 0x8100 || ethertype == 0x88a8 {
        if frame.len() < offset + 4 {
            return Frame::Malformed;
        }
        ethertype = u16::from_be_bytes([frame[offset + 2], frame[offset + 3]]);
        offset += 4;
    }
    match ethertype {
        0x0800 | 0x86dd => parse_ip(&frame[offset..]),
        _ => Frame::NonDns,
    }
}

fn parse_ip(packet: &[u8]) -> Frame<'_> {
    match packet.first().map(|b| b >> 4) {
        Some(4) => parse_ipv4(packet),
        Some(6) => parse_ipv6(packet),
        _ => Frame::Malformed,
    }
}

fn parse_ipv4(packet: &[u8]) -> Frame<'_> {
    if packet.len() < 20 {
        return Frame::Malformed;
    }
    let ihl = (packet[0] & 0x0f) as usize * 4;
    if ihl < 20 || packet.len() < ihl {
        return Frame::Malformed;
    }
    let flags_frag = u16::from_be_bytes([packet[6], packet[7]]);
    let more_fragments = flags_frag & 0x2000 != 0;
    let frag_offset = flags_frag & 0x1fff;
    if more_fragments || frag_offset != 0 {
        return Frame::Fragmented;
    }
    let total_len = u16::from_be_bytes([packet[2], packet[3]]) as usize;
    // Clamp to capture: some writers pad frames past total_len.
    let end = total_len.clamp(ihl, packet.len());
    parse_transport(packet[9], &packet[ihl..end])
}

fn parse_ipv6(packet: &[u8]) -> Frame<'_> {
    if packet.len() < 40 {
        return Frame::Malformed;
    }
    let mut next_header = packet[6];
    let mut offset = 40usize;
    // Walk the extension-header chain we understand.
    loop {
        match next_header {
            0 | 43 | 60 => {
                // hop-by-hop / routing / destination options:
                // (next header, length in 8-byte units excluding first 8).
                if packet.len() < offset + 8 {
                    return Frame::Malformed;
                }
                next_header = packet[offset];
                offset += 8 + packet[offset + 1] as usize * 8;
                if packet.len() < offset {
                    return Frame::Malformed;
                }
            }
            44 => return Frame::Fragmented,
            6 | 17 => return parse_transport(next_header, &packet[offset..]),
            _ => return Frame::NonDns,
        }
    }
}

fn parse_transport(protocol: u8, segment: &[u8]) -> Frame<'_> {
    match protocol {
        17 => {
            if segment.len() < 8 {
                return Frame::Malformed;
            }
            let sport = u16::from_be_bytes([segment[0], segment[1]]);
            let dport = u16::from_be_bytes([segment[2], segment[3]]);
            if sport != 53 && dport != 53 {
                return Frame::NonDns;
            }
            let udp_len = u16::from_be_bytes([segment[4], segment[5]]) as usize;
            let end = udp_len.clamp(8, segment.len());
            Frame::Dns(&segment[8..end])
        }
        6 => {
            if segment.len() < 20 {
                return Frame::Malformed;
            }
            let sport = u16::from_be_bytes([segment[0], segment[1]]);
            let dport = u16::from_be_bytes([segment[2], segment[3]]);
            if sport != 53 && dport != 53 {
                return Frame::NonDns;
            }
            let data_offset = (segment[12] >> 4) as usize * 4;
            if data_offset < 20 || segment.len() < data_offset {
                return Frame::Malformed;
            }
            let payload = &segment[data_offset..];
            if payload.is_empty() {
                // Bare ACK/SYN on port 53: nothing to extract.
                return Frame::NonDns;
            }
            if payload.len() < 2 {
                return Frame::Truncated;
            }
            // DNS over TCP: 2-byte length prefix. Without stream
            // reassembly, only messages fully contained in one segment parse.
            let msg_len = u16::from_be_bytes([payload[0], payload[1]]) as usize;
            if payload.len() < 2 + msg_len {
                return Frame::Truncated;
            }
            Frame::Dns(&payload[2..2 + msg_len])
        }
        _ => Frame::NonDns,
    }
}

/// Write records as a minimal legacy-pcap capture: Ethernet / IPv4 / UDP
/// frames each carrying one DNS query. Returns the number of packets
/// written. Used by `synth --pcap` and the parser round-trip tests.
pub fn write_query_pcap(path: &Path, records: &[DnsQueryRecord]) -> Result<u64> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| -> Result<()> {
        out.write_all(bytes).map_err(|e| Error::io(path, e))
    };

    // Legacy pcap global header: microsecond magic, v2.4, Ethernet.
    write(&0xa1b2c3d4u32.to_le_bytes())?;
    write(&2u16.to_le_bytes())?;
    write(&4u16.to_le_bytes())?;
    write(&0i32.to_le_bytes())?;
    write(&0u32.to_le_bytes())?;
    write(&65535u32.to_le_bytes())?;
    write(&1u32.to_le_bytes())?; // LINKTYPE_ETHERNET

    for (i, record) in records.iter().enumerate() {
        let qtype = dns_wire::qtype_number(&record.qtype).ok_or_else(|| {
            Error::Data(format!("unknown qtype mnemonic `{}`", record.qtype))
        })?;
        let dns = dns_wire::encode_query(i as u16, &record.qname, qtype).ok_or_else(|| {
            Error::Data(format!("qname `{}` is not encodable", record.qname))
        })?;
        let frame = build_udp_frame(&dns, i as u16);

        let mut ts_sec = record.timestamp.trunc() as u64;
        let mut ts_usec = ((record.timestamp - record.timestamp.trunc()) * 1e6).round() as u64;
        if ts_usec >= 1_000_000 {
            ts_sec += 1;
            ts_usec -= 1_000_000;
        }
        write(&(ts_sec as u32).to_le_bytes())?;
        write(&(ts_usec as u32).to_le_bytes())?;
        write(&(frame.len() as u32).to_le_bytes())?;
        write(&(frame.len() as u32).to_le_bytes())?;
        write(&frame)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(records.len() as u64)
}

fn build_udp_frame(dns: &[u8], ip_id: u16) -> Vec<u8> {
    let udp_len = 8 + dns.len();
    let ip_len = 20 + udp_len;
    let mut frame = Vec::with_capacity(14 + ip_len);
    // Ethernet: locally-administered MACs, IPv4 ethertype.
    frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]);
    frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]);
    frame.extend_from_slice(&0x0800u16.to_be_bytes());
    // IPv4 header.
    let ip_start = frame.len();
    frame.push(0x45);
    frame.push(0);
    frame.extend_from_slice(&(ip_len as u16).to_be_bytes());
    frame.extend_from_slice(&ip_id.to_be_bytes());
    frame.extend_from_slice(&0x4000u16.to_be_bytes()); // DF
    frame.push(64); // TTL
    frame.push(17); // UDP
    frame.extend_from_slice(&[0, 0]); // checksum placeholder
    frame.extend_from_slice(&[10, 0, 0, 2]);
    frame.extend_from_slice(&[10, 0, 0, 53]);
    let checksum = ipv4_checksum(&frame[ip_start..ip_start + 20]);
    frame[ip_start + 10..ip_start + 12].copy_from_slice(&checksum.to_be_bytes());
    // UDP header; checksum 0 = "not computed", valid for IPv4.
    frame.extend_from_slice(&(40000 + (ip_id % 20000)).to_be_bytes());
    frame.extend_from_slice(&53u16.to_be_bytes());
    frame.extend_from_slice(&(udp_len as u16).to_be_bytes());
    frame.extend_from_slice(&[0, 0]);
    frame.extend_from_slice(dns);
    frame
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum = 0u32;
    for pair in header.chunks(2) {
        let word = u16::from_be_bytes([pair[0], *pair.get(1).unwrap_or(&0)]);
        sum += word as u32;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

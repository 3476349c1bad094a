//! Standard MIDI File reading and writing (formats 0 and 1, metrical timing).

use std::collections::{HashMap, VecDeque};

use super::tempo::{TempoChange, TempoMap};
use super::{MidiError, MidiWarning, NoteEvent, PedalEvent, Performance, SUSTAIN_CONTROLLER};

const DEFAULT_TPQ: u16 = 480;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn eof(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self.bytes.get(self.pos).ok_or(MidiError::UnexpectedEof { offset: self.pos })?;
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Result<u8, MidiError> {
        self.bytes.get(self.pos).copied().ok_or(MidiError::UnexpectedEof { offset: self.pos })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(MidiError::UnexpectedEof { offset: self.bytes.len() })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::Track { offset: start, reason: "variable-length quantity longer than 4 bytes".into() })
    }
}

#[derive(Debug, Clone, Copy)]
enum RawKind {
    NoteOn { channel: u8, key: u8, velocity: u8 },
    NoteOff { channel: u8, key: u8 },
    Sustain { value: u8 },
    Tempo(u32),
}

#[derive(Debug, Clone, Copy)]
struct RawEvent {
    tick: u64,
    kind: RawKind,
}

struct Track {
    events: Vec<RawEvent>,
    end_tick: u64,
}

fn parse_track(data: &[u8], base: usize) -> Result<Track, MidiError> {
    let mut r = Reader::new(data);
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut events = Vec::new();
    let at = |r: &Reader, reason: &str| MidiError::Track { offset: base + r.pos, reason: reason.to_string() };

    while !r.eof() {
        tick += u64::from(r.vlq().map_err(|e| e.rebase(base))?);
        let status_pos = r.pos;
        let first = r.peek().map_err(|e| e.rebase(base))?;
        let status = if first & 0x80 != 0 {
            r.pos += 1;
            first
        } else {
            running.ok_or_else(|| at(&r, "data byte without running status"))?
        };

        match status {
            0xFF => {
                let meta_type = r.u8().map_err(|e| e.rebase(base))?;
                let len = r.vlq().map_err(|e| e.rebase(base))? as usize;
                let payload = r.take(len).map_err(|e| e.rebase(base))?;
                match meta_type {
                    0x51 => {
                        if payload.len() != 3 {
                            return Err(MidiError::Track {
                                offset: base + status_pos,
                                reason: "set-tempo meta event must carry 3 bytes".into(),
                            });
                        }
                        let us = u32::from_be_bytes([0, payload[0], payload[1], payload[2]]);
                        events.push(RawEvent { tick, kind: RawKind::Tempo(us) });
                    }
                    0x2F => break,
                    _ => {}
                }
                running = None;
            }
            0xF0 | 0xF7 => {
                let len = r.vlq().map_err(|e| e.rebase(base))? as usize;
                r.take(len).map_err(|e| e.rebase(base))?;
                running = None;
            }
            0x80..=0xEF => {
                running = Some(status);
                let channel = status & 0x0f;
                let kind = status & 0xf0;
                let d1 = r.u8().map_err(|e| e.rebase(base))?;
                let d2 = if matches!(kind, 0xC0 | 0xD0) { 0 } else { r.u8().map_err(|e| e.rebase(base))? };
                if d1 & 0x80 != 0 || d2 & 0x80 != 0 {
                    return Err(MidiError::Track { offset: base + status_pos, reason: "data byte has high bit set".into() });
                }
                match kind {
                    0x90 if d2 > 0 => events.push(RawEvent { tick, kind: RawKind::NoteOn { channel, key: d1, velocity: d2 } }),
                    0x90 | 0x80 => events.push(RawEvent { tick, kind: RawKind::NoteOff { channel, key: d1 } }),
                    0xB0 if d1 == SUSTAIN_CONTROLLER => events.push(RawEvent { tick, kind: RawKind::Sustain { value: d2 } }),
                    _ => {}
                }
            }
            _ => {
                return Err(MidiError::Track {
                    offset: base + status_pos,
                    reason: format!("unexpected status byte 0x{status:02X}"),
                })
            }
        }
    }
    Ok(Track { events, end_tick: tick })
}

/// Parses an SMF byte stream, returning the performance plus non-fatal warnings.
pub fn parse_midi_with_warnings(bytes: &[u8]) -> Result<(Performance, Vec<MidiWarning>), MidiError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4).map_err(|_| MidiError::Header { offset: 0, reason: "file shorter than header".into() })?;
    if magic != b"MThd" {
        return Err(MidiError::Header { offset: 0, reason: "missing MThd chunk".into() });
    }
    let header_len = r.u32_be()? as usize;
    if header_len < 6 {
        return Err(MidiError::Header { offset: 4, reason: format!("header length {header_len} < 6") });
    }
    let header = r.take(header_len)?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let ntracks = u16::from_be_bytes([header[2], header[3]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::Header { offset: 12, reason: "SMPTE time division is not supported".into() });
    }
    if division == 0 {
        return Err(MidiError::Header { offset: 12, reason: "zero ticks per quarter note".into() });
    }

    let mut tracks = Vec::with_capacity(ntracks as usize);
    while !r.eof() && tracks.len() < ntracks as usize {
        let chunk_pos = r.pos;
        let id = r.take(4).map_err(|_| MidiError::Track { offset: chunk_pos, reason: "truncated chunk header".into() })?;
        let len = r.u32_be().map_err(|_| MidiError::Track { offset: chunk_pos, reason: "truncated chunk header".into() })? as usize;
        let body_pos = r.pos;
        let body = r.take(len).map_err(|_| MidiError::Track {
            offset: chunk_pos,
            reason: format!("chunk declares {len} bytes but file ends early"),
        })?;
        if id == b"MTrk" {
            tracks.push(parse_track(body, body_pos)?);
        }
    }
    if tracks.len() < ntracks as usize {
        return Err(MidiError::Track {
            offset: bytes.len(),
            reason: format!("header declares {ntracks} tracks, found {}", tracks.len()),
        });
    }

    let tempo_changes: Vec<TempoChange> = {
        let mut v: Vec<(u64, usize, usize, u32)> = Vec::new();
        for (ti, t) in tracks.iter().enumerate() {
            for (ei, e) in t.events.iter().enumerate() {
                if let RawKind::Tempo(us) = e.kind {
                    v.push((e.tick, ti, ei, us));
                }
            }
        }
        v.sort();
        v.into_iter().map(|(tick, _, _, us)| TempoChange { tick, us_per_quarter: us }).collect()
    };
    let map = TempoMap::new(division, &tempo_changes);
    let final_tick = tracks.iter().map(|t| t.end_tick).max().unwrap_or(0);

    let mut warnings = Vec::new();
    // (onset_tick, offset_tick, pitch, velocity)
    let mut raw_notes: Vec<(u64, u64, u8, u8)> = Vec::new();
    let mut pedals: Vec<(u64, usize, usize, u8)> = Vec::new();

    for (ti, track) in tracks.iter().enumerate() {
        let mut open: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();
        for (ei, e) in track.events.iter().enumerate() {
            match e.kind {
                RawKind::NoteOn { channel, key, velocity } => {
                    open.entry((channel, key)).or_default().push_back((e.tick, velocity));
                }
                RawKind::NoteOff { channel, key } => {
                    let queue = open.entry((channel, key)).or_default();
                    // A note-off at the onset tick of the oldest open note cannot close it.
                    match queue.iter().position(|&(t, _)| t < e.tick) {
                        Some(idx) => {
                            let (on, vel) = queue.remove(idx).unwrap();
                            raw_notes.push((on, e.tick, key, vel));
                        }
                        None => warnings.push(MidiWarning::OrphanNoteOff { seconds: map.tick_to_seconds(e.tick), pitch: key }),
                    }
                }
                RawKind::Sustain { value } => pedals.push((e.tick, ti, ei, value)),
                RawKind::Tempo(_) => {}
            }
        }
        let mut leftovers: Vec<((u8, u8), (u64, u8))> = open
            .into_iter()
            .flat_map(|(k, q)| q.into_iter().map(move |n| (k, n)))
            .collect();
        leftovers.sort();
        for ((_, key), (on, vel)) in leftovers {
            let off = final_tick.max(on + 1);
            warnings.push(MidiWarning::UnterminatedNote { onset_s: map.tick_to_seconds(on), pitch: key });
            raw_notes.push((on, off, key, vel));
        }
    }

    let notes = raw_notes
        .into_iter()
        .map(|(on, off, pitch, velocity)| NoteEvent {
            note_id: 0,
            onset_s: map.tick_to_seconds(on),
            offset_s: map.tick_to_seconds(off),
            pitch,
            velocity,
        })
        .collect();
    pedals.sort();
    let pedals = pedals
        .into_iter()
        .map(|(tick, _, _, value)| PedalEvent { time_s: map.tick_to_seconds(tick), value })
        .collect();

    let perf = Performance::new(notes, pedals, division, tempo_changes);
    for n in &perf.notes {
        if !n.is_piano_range() {
            warnings.push(MidiWarning::OutOfRangePitch { note_id: n.note_id, pitch: n.pitch });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((perf, warnings))
}

/// Parses an SMF byte stream into a [`Performance`].
pub fn parse_midi(bytes: &[u8]) -> Result<Performance, MidiError> {
    parse_midi_with_warnings(bytes).map(|(p, _)| p)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

fn push_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn encode_track(events: &[(u64, Vec<u8>)]) -> Result<Vec<u8>, MidiError> {
    let mut body = Vec::new();
    let mut last = 0u64;
    for (tick, bytes) in events {
        let delta = u32::try_from(tick - last).map_err(|_| MidiError::InvalidEvent("delta time overflow".into()))?;
        if delta > 0x0FFF_FFFF {
            return Err(MidiError::InvalidEvent("delta time exceeds 28 bits".into()));
        }
        push_vlq(&mut body, delta);
        body.extend_from_slice(bytes);
        last = *tick;
    }
    push_vlq(&mut body, 0);
    body.extend_from_slice(&[0xFF, 0x2F, 0x00]);
    Ok(body)
}

/// Serializes a performance as a format-1 SMF: a tempo track followed by one
/// event track on channel 0.
pub fn write_midi(p: &Performance) -> Result<Vec<u8>, MidiError> {
    let tpq = if p.ticks_per_quarter == 0 { DEFAULT_TPQ } else { p.ticks_per_quarter };
    if tpq & 0x8000 != 0 {
        return Err(MidiError::InvalidEvent(format!("ticks per quarter {tpq} exceeds 15 bits")));
    }
    let map = TempoMap::new(tpq, &p.tempo_map);

    let mut tempo_track: Vec<(u64, Vec<u8>)> = Vec::new();
    let mut changes = p.tempo_map.clone();
    changes.sort_by_key(|c| c.tick);
    for c in &changes {
        if c.us_per_quarter == 0 || c.us_per_quarter > 0xFF_FFFF {
            return Err(MidiError::InvalidEvent(format!("tempo {} us/quarter out of range", c.us_per_quarter)));
        }
        let b = c.us_per_quarter.to_be_bytes();
        tempo_track.push((c.tick, vec![0xFF, 0x51, 0x03, b[1], b[2], b[3]]));
    }

    // Sort key: (tick, class, pitch, sequence). Note-offs precede pedal changes,
    // which precede note-ons at the same tick.
    let mut events: Vec<((u64, u8, u8, usize), Vec<u8>)> = Vec::new();
    for (seq, n) in p.notes.iter().enumerate() {
        if n.pitch > 127 || n.velocity > 127 {
            return Err(MidiError::InvalidEvent(format!("note {} has pitch/velocity outside 0..=127", n.note_id)));
        }
        let on = map.seconds_to_tick(n.onset_s);
        let off = map.seconds_to_tick(n.offset_s).max(on + 1);
        let vel = n.velocity.max(1);
        events.push(((on, 2, n.pitch, seq), vec![0x90, n.pitch, vel]));
        events.push(((off, 0, n.pitch, seq), vec![0x80, n.pitch, 0x40]));
    }
    for (seq, e) in p.pedals.iter().enumerate() {
        if e.value > 127 {
            return Err(MidiError::InvalidEvent(format!("pedal value {} out of range", e.value)));
        }
        let tick = map.seconds_to_tick(e.time_s);
        events.push(((tick, 1, 0, seq), vec![0xB0, SUSTAIN_CONTROLLER, e.value]));
    }
    events.sort_by_key(|(k, _)| *k);
    let note_track: Vec<(u64, Vec<u8>)> = events.into_iter().map(|((t, ..), b)| (t, b)).collect();

    let mut out = Vec::new();
    let mut header = Vec::with_capacity(6);
    header.extend_from_slice(&1u16.to_be_bytes());
    header.extend_from_slice(&2u16.to_be_bytes());
    header.extend_from_slice(&tpq.to_be_bytes());
    push_chunk(&mut out, b"MThd", &header);
    push_chunk(&mut out, b"MTrk", &encode_track(&tempo_track)?);
    push_chunk(&mut out, b"MTrk", &encode_track(&note_track)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled SMF from (format, tpq, tracks of raw event bytes with deltas).
    pub(crate) fn smf(format: u16, tpq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&tpq.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    const EOT: [u8; 4] = [0x00, 0xFF, 0x2F, 0x00];

    #[test]
    fn single_note() {
        // 120 bpm default, tpq 480: 960 ticks = 1 s. 960 = 0x87 0x40 as VLQ.
        let mut t = vec![0x00, 0x90, 60, 64, 0x87, 0x40, 0x80, 60, 0];
        t.extend_from_slice(&EOT);
        let p = parse_midi(&smf(0, 480, &[t])).unwrap();
        assert_eq!(p.notes.len(), 1);
        let n = p.notes[0];
        assert_eq!((n.note_id, n.pitch, n.velocity), (0, 60, 64));
        assert_eq!((n.onset_s, n.offset_s), (0.0, 1.0));
    }

    #[test]
    fn note_on_zero_velocity_is_note_off() {
        let mut a = vec![0x00, 0x90, 60, 64, 0x87, 0x40, 0x80, 60, 0];
        a.extend_from_slice(&EOT);
        // Running status: second event omits the 0x90 status byte.
        let mut b = vec![0x00, 0x90, 60, 64, 0x87, 0x40, 60, 0];
        b.extend_from_slice(&EOT);
        let pa = parse_midi(&smf(0, 480, &[a])).unwrap();
        let pb = parse_midi(&smf(0, 480, &[b])).unwrap();
        assert_eq!(pa.notes, pb.notes);
    }

    #[test]
    fn tempo_change_doubles_second_half_durations() {
        // Track 0: 120 bpm at 0, 60 bpm at beat 2 (tick 960).
        let mut conductor = vec![0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20];
        conductor.extend_from_slice(&[0x87, 0x40, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40]);
        conductor.extend_from_slice(&EOT);
        // Track 1: four quarter notes back to back (480 ticks = 0x83 0x60).
        let mut notes = Vec::new();
        for (i, pitch) in [60u8, 62, 64, 65].into_iter().enumerate() {
            notes.extend_from_slice(&[0x00, 0x90, pitch, 80]);
            notes.extend_from_slice(&[0x83, 0x60, 0x80, pitch, 0]);
            let _ = i;
        }
        notes.extend_from_slice(&EOT);
        let p = parse_midi(&smf(1, 480, &[conductor, notes])).unwrap();
        let durs: Vec<f64> = p.notes.iter().map(|n| n.offset_s - n.onset_s).collect();
        // Hand-computed: 0.5 s per beat for beats 0-1, 1.0 s per beat afterwards.
        assert_eq!(durs, vec![0.5, 0.5, 1.0, 1.0]);
        let onsets: Vec<f64> = p.notes.iter().map(|n| n.onset_s).collect();
        assert_eq!(onsets, vec![0.0, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn unpaired_note_closes_at_final_event() {
        let mut t = vec![0x00, 0x90, 60, 64, 0x00, 0x90, 64, 70, 0x87, 0x40, 0x80, 64, 0];
        t.extend_from_slice(&EOT);
        let (p, warnings) = parse_midi_with_warnings(&smf(0, 480, &[t])).unwrap();
        assert_eq!(p.notes.len(), 2);
        assert!(p.notes.iter().all(|n| n.offset_s == 1.0));
        assert!(warnings.iter().any(|w| matches!(w, MidiWarning::UnterminatedNote { pitch: 60, .. })));
    }

    #[test]
    fn fifo_pairing_for_overlapping_same_pitch() {
        // on@0, on@480, off@960, off@1440
        let mut t = vec![0x00, 0x90, 60, 10, 0x83, 0x60, 0x90, 60, 20];
        t.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0, 0x83, 0x60, 0x80, 60, 0]);
        t.extend_from_slice(&EOT);
        let p = parse_midi(&smf(0, 480, &[t])).unwrap();
        assert_eq!(p.notes[0].velocity, 10);
        assert_eq!(p.notes[0].offset_s, 1.0);
        assert_eq!(p.notes[1].velocity, 20);
        assert_eq!(p.notes[1].offset_s, 1.5);
    }

    #[test]
    fn pedal_events_captured() {
        let mut t = vec![0x00, 0xB0, 64, 127, 0x87, 0x40, 0xB0, 64, 0, 0x00, 0xB0, 7, 100];
        t.extend_from_slice(&EOT);
        let p = parse_midi(&smf(0, 480, &[t])).unwrap();
        assert_eq!(p.pedals, vec![PedalEvent { time_s: 0.0, value: 127 }, PedalEvent { time_s: 1.0, value: 0 }]);
    }

    #[test]
    fn rejects_format_2() {
        let bytes = smf(2, 480, &[EOT.to_vec()]);
        assert!(matches!(parse_midi(&bytes), Err(MidiError::UnsupportedFormat(2))));
    }

    #[test]
    fn malformed_header_reports_offset() {
        let err = parse_midi(b"MThx\0\0\0\x06").unwrap_err();
        assert!(matches!(err, MidiError::Header { offset: 0, .. }));
        assert!(parse_midi(b"").is_err());
    }

    #[test]
    fn truncated_track_reports_offset() {
        let mut bytes = smf(0, 480, &[vec![0x00, 0x90, 60, 64, 0x87, 0x40, 0x80, 60, 0]]);
        // Claim a longer track than present.
        let len_pos = 14 + 4;
        bytes[len_pos..len_pos + 4].copy_from_slice(&100u32.to_be_bytes());
        match parse_midi(&bytes).unwrap_err() {
            MidiError::Track { offset, .. } => assert_eq!(offset, 14),
            e => panic!("unexpected {e:?}"),
        }
        // Bad status byte inside the track body.
        let bytes = smf(0, 480, &[vec![0x00, 0xF3, 0x00]]);
        match parse_midi(&bytes).unwrap_err() {
            MidiError::Track { offset, .. } => assert_eq!(offset, 22 + 1),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn empty_performance_writes_valid_file() {
        let p = Performance::default();
        let bytes = write_midi(&p).unwrap();
        let back = parse_midi(&bytes).unwrap();
        assert!(back.notes.is_empty() && back.pedals.is_empty());
    }

    #[test]
    fn round_trip_single_note_and_pedals() {
        let mut t = vec![0x00, 0x90, 60, 64, 0x87, 0x40, 0x80, 60, 0];
        t.extend_from_slice(&EOT);
        let p = parse_midi(&smf(0, 480, &[t])).unwrap();
        let back = parse_midi(&write_midi(&p).unwrap()).unwrap();
        assert_eq!(back.notes, p.notes);

        let p = Performance::new(
            vec![],
            vec![
                PedalEvent { time_s: 0.25, value: 100 },
                PedalEvent { time_s: 0.5, value: 30 },
                PedalEvent { time_s: 0.5, value: 90 },
            ],
            480,
            vec![],
        );
        let back = parse_midi(&write_midi(&p).unwrap()).unwrap();
        assert_eq!(back.pedals, p.pedals);
    }
}

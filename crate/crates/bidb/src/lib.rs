//! Persistent trace databases (`.bidb`).
//!
//! A database holds every trace point collected from one program over a
//! suite of witness inputs. The file layout is fixed and little-endian so
//! identical input always produces identical bytes:
//!
//! ```text
//! magic "BIDB1\0" | version u16 | program digest [u8;32] | max-trace u64
//! string table:  count u32, then per string: len u32 + bytes
//! witness table: count u32, then per witness: id u32 + argc u16 + arg sids
//! points:        witness u32, step u32, stmt u32, nvars u16,
//!                per var: name-sid u32, type-sid u32, flags u8,
//!                         value i64, size u64 when flags bit3
//! trailer:       crc32 of all preceding bytes
//! ```
//!
//! Var flags: bit0 const, bit1 pointer, bit2 null, bit3 has-size. Strings
//! are interned in first-use order. There is no point count; points run to
//! four bytes before end of file. Files are immutable once written.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use minic::ast::NodeId;
use minic::{AnalyzedProgram, ProgramInput, TracePoint, Type, VarSnapshot};
use sha2::{Digest, Sha256};
use thiserror::Error;

const MAGIC: &[u8; 6] = b"BIDB1\0";
const VERSION: u16 = 1;

const FLAG_CONST: u8 = 1;
const FLAG_POINTER: u8 = 2;
const FLAG_NULL: u8 = 4;
const FLAG_SIZE: u8 = 8;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("corrupt trace db: {0}")]
    CorruptDb(String),
    #[error("witness id {0} appended twice")]
    DuplicateWitnessId(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// SHA-256 of the program's canonical pretty-printed source. Burned into
/// every db so traces can never be matched against a different program.
pub fn program_digest(prog: &AnalyzedProgram) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(prog.canonical_source().as_bytes());
    h.finalize().into()
}

pub fn digest_hex(digest: &[u8; 32]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Accumulates traces, then serializes once. Append-only; a witness id can
/// be used only once.
pub struct TraceDbBuilder {
    digest: [u8; 32],
    max_trace: u64,
    strings: Vec<String>,
    string_ids: HashMap<String, u32>,
    witnesses: Vec<(u32, Vec<u32>)>,
    seen: HashSet<u32>,
    points: Vec<TracePoint>,
}

impl TraceDbBuilder {
    pub fn new(digest: [u8; 32], max_trace: u64) -> TraceDbBuilder {
        TraceDbBuilder {
            digest,
            max_trace,
            strings: Vec::new(),
            string_ids: HashMap::new(),
            witnesses: Vec::new(),
            seen: HashSet::new(),
            points: Vec::new(),
        }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.string_ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.string_ids.insert(s.to_string(), id);
        id
    }

    /// Record one witness and its points; returns the stored point count.
    pub fn append_trace(
        &mut self,
        input: &ProgramInput,
        points: &[TracePoint],
    ) -> Result<usize, DbError> {
        if !self.seen.insert(input.id) {
            return Err(DbError::DuplicateWitnessId(input.id));
        }
        let args: Vec<u32> = input.args.iter().map(|a| self.intern(a)).collect();
        self.witnesses.push((input.id, args));
        for p in points {
            debug_assert_eq!(p.witness, input.id);
            for v in &p.vars {
                self.intern(&v.name);
                self.intern(&v.ty.to_string());
            }
            self.points.push(p.clone());
        }
        Ok(points.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(&self.max_trace.to_le_bytes());
        out.extend_from_slice(&(self.strings.len() as u32).to_le_bytes());
        for s in &self.strings {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.witnesses.len() as u32).to_le_bytes());
        for (id, args) in &self.witnesses {
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&(args.len() as u16).to_le_bytes());
            for sid in args {
                out.extend_from_slice(&sid.to_le_bytes());
            }
        }
        for p in &self.points {
            out.extend_from_slice(&p.witness.to_le_bytes());
            out.extend_from_slice(&p.step.to_le_bytes());
            out.extend_from_slice(&p.stmt.0.to_le_bytes());
            out.extend_from_slice(&(p.vars.len() as u16).to_le_bytes());
            for v in &p.vars {
                let name = self.string_ids[&v.name];
                let ty = self.string_ids[&v.ty.to_string()];
                out.extend_from_slice(&name.to_le_bytes());
                out.extend_from_slice(&ty.to_le_bytes());
                let mut flags = 0u8;
                if v.is_const {
                    flags |= FLAG_CONST;
                }
                if v.is_pointer() {
                    flags |= FLAG_POINTER;
                }
                if v.is_null() {
                    flags |= FLAG_NULL;
                }
                if v.size.is_some() {
                    flags |= FLAG_SIZE;
                }
                out.push(flags);
                out.extend_from_slice(&v.value.to_le_bytes());
                if let Some(size) = v.size {
                    out.extend_from_slice(&size.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), DbError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    /// Finalize in memory. Goes through the byte format so in-memory and
    /// on-disk databases cannot drift apart.
    pub fn finish(&self) -> TraceDb {
        TraceDb::from_bytes(&self.to_bytes()).expect("self-produced bytes parse")
    }
}

/// A finalized, immutable trace database.
pub struct TraceDb {
    digest: [u8; 32],
    max_trace: u64,
    witnesses: BTreeMap<u32, Vec<String>>,
    points: Vec<TracePoint>,
    /// Indices into `points` ordered by (witness, step).
    sorted: Vec<usize>,
    /// Per-statement postings, each ordered by (witness, step).
    index: HashMap<NodeId, Vec<usize>>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DbError> {
        if self.pos + n > self.bytes.len() {
            return Err(DbError::CorruptDb("truncated record".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, DbError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DbError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DbError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, DbError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl TraceDb {
    pub fn open(path: &Path) -> Result<TraceDb, DbError> {
        TraceDb::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TraceDb, DbError> {
        if bytes.len() < MAGIC.len() + 2 + 32 + 8 + 4 {
            return Err(DbError::CorruptDb("file too short".into()));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(DbError::CorruptDb("crc mismatch".into()));
        }
        let mut r = Reader { bytes: body, pos: 0 };
        if r.take(6)? != MAGIC {
            return Err(DbError::CorruptDb("bad magic".into()));
        }
        if r.u16()? != VERSION {
            return Err(DbError::CorruptDb("unsupported version".into()));
        }
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let max_trace = r.u64()?;

        let nstrings = r.u32()?;
        let mut strings = Vec::with_capacity(nstrings as usize);
        for _ in 0..nstrings {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let s = std::str::from_utf8(raw)
                .map_err(|_| DbError::CorruptDb("non-utf8 string".into()))?;
            strings.push(s.to_string());
        }
        let lookup = |sid: u32| -> Result<&String, DbError> {
            strings.get(sid as usize).ok_or_else(|| DbError::CorruptDb("string id".into()))
        };

        let nwit = r.u32()?;
        let mut witnesses = BTreeMap::new();
        for _ in 0..nwit {
            let id = r.u32()?;
            let argc = r.u16()?;
            let mut args = Vec::with_capacity(argc as usize);
            for _ in 0..argc {
                args.push(lookup(r.u32()?)?.clone());
            }
            if witnesses.insert(id, args).is_some() {
                return Err(DbError::DuplicateWitnessId(id));
            }
        }

        let mut points = Vec::new();
        while r.pos < body.len() {
            let witness = r.u32()?;
            if !witnesses.contains_key(&witness) {
                return Err(DbError::CorruptDb(format!("point for unknown witness {witness}")));
            }
            let step = r.u32()?;
            let stmt = NodeId(r.u32()?);
            let nvars = r.u16()?;
            let mut vars = Vec::with_capacity(nvars as usize);
            for _ in 0..nvars {
                let name = lookup(r.u32()?)?.clone();
                let ty_str = lookup(r.u32()?)?;
                let ty = Type::parse(ty_str)
                    .map_err(|_| DbError::CorruptDb(format!("bad type {ty_str:?}")))?;
                let flags = r.take(1)?[0];
                let value = r.i64()?;
                let size =
                    if flags & FLAG_SIZE != 0 { Some(r.u64()?) } else { None };
                let v = VarSnapshot { name, ty, is_const: flags & FLAG_CONST != 0, value, size };
                let expect = (v.is_pointer() as u8 * FLAG_POINTER)
                    | (v.is_null() as u8 * FLAG_NULL);
                if flags & (FLAG_POINTER | FLAG_NULL) != expect {
                    return Err(DbError::CorruptDb("inconsistent var flags".into()));
                }
                vars.push(v);
            }
            points.push(TracePoint { witness, step, stmt, vars });
        }

        let mut sorted: Vec<usize> = (0..points.len()).collect();
        sorted.sort_by_key(|&i| (points[i].witness, points[i].step));
        let mut index: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for &i in &sorted {
            index.entry(points[i].stmt).or_default().push(i);
        }
        Ok(TraceDb { digest, max_trace, witnesses, points, sorted, index })
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn max_trace(&self) -> u64 {
        self.max_trace
    }

    /// Witness ids and their argument lists, ordered by id.
    pub fn witnesses(&self) -> &BTreeMap<u32, Vec<String>> {
        &self.witnesses
    }

    /// All points in append (file) order.
    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    /// Points in (witness, step) order, optionally restricted to a
    /// statement set. An empty filter yields nothing.
    pub fn scan<'a>(
        &'a self,
        filter: Option<&'a HashSet<NodeId>>,
    ) -> impl Iterator<Item = &'a TracePoint> + 'a {
        self.sorted
            .iter()
            .map(move |&i| &self.points[i])
            .filter(move |p| filter.is_none_or(|f| f.contains(&p.stmt)))
    }

    /// Points at one statement, in (witness, step) order.
    pub fn points_for_stmt(&self, stmt: NodeId) -> impl Iterator<Item = &TracePoint> + '_ {
        self.index.get(&stmt).into_iter().flatten().map(move |&i| &self.points[i])
    }

    /// Line-per-point text form for diffing and golden tests.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "bidb version=1 max-trace={} digest={}\n",
            self.max_trace,
            digest_hex(&self.digest)
        );
        for (id, args) in &self.witnesses {
            out.push_str(&format!("witness {id} {args:?}\n"));
        }
        for p in &self.points {
            out.push_str(&format!("point w={} s={} stmt={}", p.witness, p.step, p.stmt));
            for v in &p.vars {
                let flags: String = [
                    (v.is_const, 'c'),
                    (v.is_pointer(), 'p'),
                    (v.is_null(), 'n'),
                    (v.size.is_some(), 's'),
                ]
                .iter()
                .map(|&(on, ch)| if on { ch } else { '-' })
                .collect();
                out.push_str(&format!(" {}:{}:{}:{}", v.name, v.ty, flags, v.value));
                if let Some(size) = v.size {
                    out.push_str(&format!(":{size}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

//! Tabular inventory loading and AugmentID assignment.
//!
//! Spaces and equipment arrive as UTF-8 CSV with fixed headers
//! ([`SPACE_HEADER`], [`EQUIPMENT_HEADER`]). Rows are validated independently
//! (in parallel when enabled), valid rows are committed, and then every space
//! and equipment item still lacking an AugmentID receives one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::graph::{discipline_mismatch, Discipline, EquipmentItem, EventBody, GraphError, OmValue, SpaceRecord, TwinGraph, TwinStore};
use crate::omniclass::{OmniclassCode, OmniclassTable};
use crate::par::{self, Execution};
use crate::time::Timestamp;

pub const SPACE_HEADER: [&str; 5] = ["Room-Category", "Room-Name", "Room-Tag", "Room-AugmentID", "floor_level"];

pub const EQUIPMENT_HEADER: [&str; 7] = [
    "OMNICLASS_SYSTEM",
    "OMNICLASS_TYPE",
    "AugmentID_Type",
    "AugmentID_Instance",
    "Space_Instance",
    "discipline",
    "om_properties",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    RequiredField,
    MalformedCode,
    DanglingSpace,
    DuplicateTag,
    IdCollision,
    BadDiscipline,
    BadProperties,
    FieldCount,
    DisciplineMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// The row is rejected.
    Error,
    /// The row is stored; the issue is reported.
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InventoryFile {
    Spaces,
    Equipment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub file: InventoryFile,
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub rule: Rule,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(file: InventoryFile, row: usize, rule: Rule, message: impl Into<String>) -> Self {
        Self { file, row, rule, severity: Severity::Error, message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub space_rows: usize,
    pub spaces_loaded: usize,
    pub spaces_rejected: usize,
    pub equipment_rows: usize,
    /// Accepted rows, including rows already present from an earlier load.
    pub equipment_loaded: usize,
    pub equipment_rejected: usize,
    pub violations: Vec<Violation>,
    pub assigned_ids: usize,
    /// Events appended by this load.
    pub events_committed: u64,
    /// True when strict mode refused to commit anything.
    pub aborted: bool,
}

impl IngestReport {
    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| v.severity == Severity::Error)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    FileUnreadable { path: PathBuf, message: String },
    #[error("{file:?} header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { file: InventoryFile, expected: Vec<String>, found: Vec<String> },
    #[error("AugmentID collision: {0}")]
    IdCollision(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Commit nothing if any row has an error.
    pub strict: bool,
    pub exec: Execution,
}

/// One equipment row as read from the file, before any parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquipmentRow {
    pub omniclass_system: String,
    pub omniclass_type: String,
    pub augment_id_type: String,
    pub augment_id_instance: String,
    pub space_instance: String,
    pub discipline: String,
    pub om_properties: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpaceRow {
    pub room_category: String,
    pub room_name: String,
    pub room_tag: String,
    pub room_augment_id: String,
    pub floor_level: String,
}

/// Parses and checks one equipment row. Returns the record when no
/// error-severity violation was found.
pub fn check_equipment_row(
    row_no: usize,
    row: &EquipmentRow,
    space_exists: &dyn Fn(&str) -> bool,
) -> (Option<EquipmentItem>, Vec<Violation>) {
    let file = InventoryFile::Equipment;
    let mut violations = Vec::new();
    let code = |text: &str, column: &str, violations: &mut Vec<Violation>| {
        if text.trim().is_empty() {
            violations.push(Violation::error(file, row_no, Rule::RequiredField, format!("{column} is required")));
            return None;
        }
        match OmniclassCode::parse_in(text, OmniclassTable::Products) {
            Ok(code) => Some(code),
            Err(e) => {
                violations.push(Violation::error(file, row_no, Rule::MalformedCode, format!("{column}: {e}")));
                None
            }
        }
    };
    let system = code(&row.omniclass_system, "OMNICLASS_SYSTEM", &mut violations);
    let kind = code(&row.omniclass_type, "OMNICLASS_TYPE", &mut violations);

    let space = row.space_instance.trim();
    if space.is_empty() {
        violations.push(Violation::error(file, row_no, Rule::RequiredField, "Space_Instance is required"));
    } else if !space_exists(space) {
        violations.push(Violation::error(file, row_no, Rule::DanglingSpace, format!("unknown space {space:?}")));
    }

    let discipline = if row.discipline.trim().is_empty() {
        let implied = system.as_ref().and_then(OmniclassCode::system_discipline);
        if implied.is_none() && system.is_some() {
            violations.push(Violation::error(
                file,
                row_no,
                Rule::RequiredField,
                "discipline is empty and cannot be derived from OMNICLASS_SYSTEM",
            ));
        }
        implied
    } else {
        match row.discipline.parse::<Discipline>() {
            Ok(d) => Some(d),
            Err(e) => {
                violations.push(Violation::error(file, row_no, Rule::BadDiscipline, e));
                None
            }
        }
    };

    let om_properties = if row.om_properties.trim().is_empty() {
        Some(BTreeMap::new())
    } else {
        match serde_json::from_str::<BTreeMap<String, OmValue>>(&row.om_properties) {
            Ok(map) => Some(map),
            Err(e) => {
                violations.push(Violation::error(file, row_no, Rule::BadProperties, format!("om_properties: {e}")));
                None
            }
        }
    };

    let (Some(system), Some(kind), Some(discipline), Some(om_properties)) = (system, kind, discipline, om_properties) else {
        return (None, violations);
    };
    if !violations.is_empty() {
        return (None, violations);
    }
    let item = EquipmentItem {
        omniclass_system: system,
        omniclass_type: kind,
        augment_id_type: row.augment_id_type.trim().to_string(),
        augment_id_instance: row.augment_id_instance.trim().to_string(),
        space_instance: space.to_string(),
        discipline,
        om_properties,
        document_ids: Vec::new(),
    };
    if let Some(m) = discipline_mismatch(&item) {
        violations.push(Violation {
            file,
            row: row_no,
            rule: Rule::DisciplineMismatch,
            severity: Severity::Warning,
            message: format!("declared {} but system code implies {}", m.declared, m.implied),
        });
    }
    (Some(item), violations)
}

/// Violations for one equipment row against the spaces of `graph`. Empty
/// means the row would be stored as is.
pub fn validate_equipment(row: &EquipmentRow, graph: &TwinGraph) -> Vec<Violation> {
    let exists = |tag: &str| graph.spaces.contains_key(tag);
    check_equipment_row(1, row, &exists).1
}

fn check_space_row(row_no: usize, row: &SpaceRow) -> Result<SpaceRecord, Vec<Violation>> {
    let file = InventoryFile::Spaces;
    let mut violations = Vec::new();
    let category = if row.room_category.trim().is_empty() {
        violations.push(Violation::error(file, row_no, Rule::RequiredField, "Room-Category is required"));
        None
    } else {
        OmniclassCode::parse_in(&row.room_category, OmniclassTable::Spaces)
            .map_err(|e| violations.push(Violation::error(file, row_no, Rule::MalformedCode, format!("Room-Category: {e}"))))
            .ok()
    };
    let tag = row.room_tag.trim();
    if tag.is_empty() {
        violations.push(Violation::error(file, row_no, Rule::RequiredField, "Room-Tag is required"));
    }
    match category {
        Some(category) if violations.is_empty() => Ok(SpaceRecord {
            room_category: category,
            room_name: row.room_name.trim().to_string(),
            room_tag: tag.to_string(),
            room_augment_id: row.room_augment_id.trim().to_string(),
            floor_level: row.floor_level.trim().to_string(),
        }),
        _ => Err(violations),
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| IngestError::FileUnreadable { path: path.to_path_buf(), message: e.to_string() })
}

fn read_rows<const N: usize>(
    reader: impl Read,
    file: InventoryFile,
    header: [&str; N],
    violations: &mut Vec<Violation>,
) -> Result<Vec<(usize, Option<[String; N]>)>, IngestError> {
    let label = match file {
        InventoryFile::Spaces => SPACES_LABEL,
        InventoryFile::Equipment => EQUIPMENT_LABEL,
    };
    let unreadable = |message: String| IngestError::FileUnreadable { path: PathBuf::from(label), message };
    let mut csv = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let found: Vec<String> = csv
        .headers()
        .map_err(|e| unreadable(e.to_string()))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if found != header {
        return Err(IngestError::HeaderMismatch {
            file,
            expected: header.iter().map(|h| h.to_string()).collect(),
            found,
        });
    }
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| unreadable(e.to_string()))?;
        if record.len() != N {
            violations.push(Violation::error(
                file,
                row_no,
                Rule::FieldCount,
                format!("expected {N} fields, found {}", record.len()),
            ));
            rows.push((row_no, None));
            continue;
        }
        rows.push((row_no, Some(std::array::from_fn(|k| record[k].to_string()))));
    }
    Ok(rows)
}

/// Reads and loads the inventory files. Either file may be omitted.
pub fn load_inventory(
    store: &mut TwinStore,
    at: Timestamp,
    spaces: Option<&Path>,
    equipment: Option<&Path>,
    options: IngestOptions,
) -> Result<IngestReport, IngestError> {
    let space_file = spaces.map(open).transpose()?;
    let equipment_file = equipment.map(open).transpose()?;
    load_inventory_from(store, at, space_file, equipment_file, options).map_err(|e| match e {
        IngestError::FileUnreadable { path, message } => {
            let actual = if path == Path::new(SPACES_LABEL) { spaces } else { equipment };
            IngestError::FileUnreadable { path: actual.map_or(path, Path::to_path_buf), message }
        }
        other => other,
    })
}

const SPACES_LABEL: &str = "<spaces>";
const EQUIPMENT_LABEL: &str = "<equipment>";

/// Same as [`load_inventory`] over arbitrary readers.
pub fn load_inventory_from(
    store: &mut TwinStore,
    at: Timestamp,
    spaces: Option<impl Read>,
    equipment: Option<impl Read>,
    options: IngestOptions,
) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    let mut violations = Vec::new();

    let space_rows = match spaces {
        Some(r) => read_rows(r, InventoryFile::Spaces, SPACE_HEADER, &mut violations)?,
        None => Vec::new(),
    };
    let equipment_rows = match equipment {
        Some(r) => read_rows(r, InventoryFile::Equipment, EQUIPMENT_HEADER, &mut violations)?,
        None => Vec::new(),
    };
    report.space_rows = space_rows.len();
    report.equipment_rows = equipment_rows.len();

    // Spaces: parse, then check tag conflicts against the graph and earlier rows.
    let mut accepted_spaces: Vec<(usize, SpaceRecord)> = Vec::new();
    let mut seen: HashMap<String, SpaceRecord> = HashMap::new();
    for (row_no, cells) in &space_rows {
        let Some(cells) = cells else { continue };
        let row = SpaceRow {
            room_category: cells[0].clone(),
            room_name: cells[1].clone(),
            room_tag: cells[2].clone(),
            room_augment_id: cells[3].clone(),
            floor_level: cells[4].clone(),
        };
        match check_space_row(*row_no, &row) {
            Err(v) => violations.extend(v),
            Ok(record) => {
                let prior = seen.get(&record.room_tag).or_else(|| store.graph().spaces.get(&record.room_tag));
                if let Some(prior) = prior {
                    if prior.room_name != record.room_name || prior.room_category != record.room_category {
                        violations.push(Violation::error(
                            InventoryFile::Spaces,
                            *row_no,
                            Rule::DuplicateTag,
                            format!("room tag {:?} already used for {:?}", record.room_tag, prior.room_name),
                        ));
                        continue;
                    }
                }
                seen.insert(record.room_tag.clone(), record.clone());
                accepted_spaces.push((*row_no, record));
            }
        }
    }
    report.spaces_loaded = accepted_spaces.len();
    report.spaces_rejected = report.space_rows - report.spaces_loaded;

    // Equipment: rows are independent, so parsing and checking run in parallel.
    let known: BTreeSet<&str> = store
        .graph()
        .spaces
        .keys()
        .map(String::as_str)
        .chain(seen.keys().map(String::as_str))
        .collect();
    let exists = |tag: &str| known.contains(tag);
    let checked = par::map(options.exec, &equipment_rows, |(row_no, cells)| match cells {
        None => (*row_no, None, Vec::new()),
        Some(c) => {
            let row = EquipmentRow {
                omniclass_system: c[0].clone(),
                omniclass_type: c[1].clone(),
                augment_id_type: c[2].clone(),
                augment_id_instance: c[3].clone(),
                space_instance: c[4].clone(),
                discipline: c[5].clone(),
                om_properties: c[6].clone(),
            };
            let (item, v) = check_equipment_row(*row_no, &row, &exists);
            (*row_no, item, v)
        }
    });
    drop(known);

    let mut accepted_equipment: Vec<(usize, EquipmentItem)> = Vec::new();
    let mut preset_ids: HashMap<String, usize> = HashMap::new();
    for (row_no, item, v) in checked {
        violations.extend(v);
        let Some(item) = item else { continue };
        if !item.augment_id_instance.is_empty() {
            if let Some(first) = preset_ids.insert(item.augment_id_instance.clone(), row_no) {
                violations.push(Violation::error(
                    InventoryFile::Equipment,
                    row_no,
                    Rule::IdCollision,
                    format!("AugmentID_Instance {:?} already used on row {first}", item.augment_id_instance),
                ));
                continue;
            }
        }
        accepted_equipment.push((row_no, item));
    }
    report.equipment_loaded = accepted_equipment.len();
    report.equipment_rejected = report.equipment_rows - report.equipment_loaded;

    violations.sort_by_key(|v| (v.file, v.row, v.rule));
    report.violations = violations;

    if options.strict && report.has_errors() {
        report.aborted = true;
        return Ok(report);
    }

    let before = store.last_seq();
    for (_, record) in accepted_spaces {
        store.upsert_space(at, record, false)?;
    }

    // Rows without ids match existing content as a multiset, so re-loading
    // the same file adds nothing.
    let key = |item: &EquipmentItem| serde_json::to_string(&item.content_key()).expect("records serialize");
    let mut available: HashMap<String, usize> = HashMap::new();
    for item in store.graph().all_equipment() {
        *available.entry(key(item)).or_default() += 1;
    }
    // Rows with pre-set ids go first: committing one while an identical
    // unassigned item is pending would claim that item instead.
    let (preset, unassigned): (Vec<_>, Vec<_>) =
        accepted_equipment.into_iter().map(|(_, item)| item).partition(|item| !item.augment_id_instance.is_empty());
    for item in preset {
        if store.graph().equipment.contains_key(&item.augment_id_instance) {
            if let Some(n) = available.get_mut(&key(&item)).filter(|n| **n > 0) {
                *n -= 1;
            }
        }
        store.upsert_equipment(at, item)?;
    }
    for item in unassigned {
        if let Some(n) = available.get_mut(&key(&item)).filter(|n| **n > 0) {
            *n -= 1;
            continue;
        }
        store.upsert_equipment(at, item)?;
    }

    report.assigned_ids = store.assign_augment_ids(at)?;
    report.events_committed = store.last_seq() - before;
    Ok(report)
}

/// Records to re-commit so that every space and equipment item carries an
/// AugmentID. Pure function of the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentPlan {
    pub spaces: Vec<SpaceRecord>,
    pub equipment: Vec<EquipmentItem>,
}

impl AugmentPlan {
    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty() && self.equipment.is_empty()
    }

    pub fn len(&self) -> usize {
        self.spaces.len() + self.equipment.len()
    }
}

fn generated_number(id: &str, prefix: &str, width: usize) -> Option<u64> {
    let digits = id.strip_prefix(prefix)?;
    (digits.len() == width && digits.bytes().all(|b| b.is_ascii_digit())).then(|| digits.parse().ok()).flatten()
}

fn next_free<'a>(prefix: &'a str, width: usize, used: &'a BTreeSet<String>) -> impl FnMut() -> String + 'a {
    let mut n = used.iter().filter_map(|id| generated_number(id, prefix, width)).max().unwrap_or(0);
    move || loop {
        n += 1;
        let id = format!("{prefix}{n:0width$}");
        if !used.contains(&id) {
            return id;
        }
    }
}

/// Plans AugmentIDs:
///
/// * pending equipment, ordered by (type code, ingest order), get `EQ-nnnnn`
///   continuing after the highest generated number already in use;
/// * each Omniclass type without a type id gets `TY-nnn`, in type order;
/// * spaces without an id get `SP-nnn` in room-tag order.
///
/// Pre-set ids are kept. A type id pre-set on two different types, or two
/// different ids pre-set on one type, is an [`IngestError::IdCollision`].
pub fn plan_augment_ids(graph: &TwinGraph) -> Result<AugmentPlan, IngestError> {
    let mut plan = AugmentPlan::default();

    // Type ids.
    let mut type_ids: BTreeMap<String, String> = BTreeMap::new();
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    for item in graph.all_equipment() {
        let key = item.omniclass_type.to_string();
        if item.augment_id_type.is_empty() {
            continue;
        }
        if let Some(existing) = type_ids.get(&key) {
            if existing != &item.augment_id_type {
                return Err(IngestError::IdCollision(format!(
                    "type {key:?} carries both {existing:?} and {:?}",
                    item.augment_id_type
                )));
            }
        }
        if let Some(other) = owner.get(&item.augment_id_type) {
            if other != &key {
                return Err(IngestError::IdCollision(format!(
                    "type id {:?} is used by {other:?} and {key:?}",
                    item.augment_id_type
                )));
            }
        }
        type_ids.insert(key.clone(), item.augment_id_type.clone());
        owner.insert(item.augment_id_type.clone(), key);
    }
    let used_types: BTreeSet<String> = owner.keys().cloned().collect();
    let mut next_type = next_free("TY-", 3, &used_types);
    let all_types: BTreeSet<String> = graph.all_equipment().map(|i| i.omniclass_type.to_string()).collect();
    for key in all_types {
        type_ids.entry(key).or_insert_with(&mut next_type);
    }

    // Instance ids.
    let used_instances: BTreeSet<String> = graph.equipment.keys().cloned().collect();
    let mut next_instance = next_free("EQ-", 5, &used_instances);
    let mut pending: Vec<(String, usize, &EquipmentItem)> = graph
        .pending_equipment
        .iter()
        .enumerate()
        .map(|(i, item)| (item.omniclass_type.to_string(), i, item))
        .collect();
    pending.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    for (key, _, item) in pending {
        plan.equipment.push(EquipmentItem {
            augment_id_instance: next_instance(),
            augment_id_type: type_ids[&key].clone(),
            ..item.clone()
        });
    }
    for item in graph.equipment.values() {
        let ty = &type_ids[&item.omniclass_type.to_string()];
        if &item.augment_id_type != ty {
            plan.equipment.push(EquipmentItem { augment_id_type: ty.clone(), ..item.clone() });
        }
    }

    // Space ids.
    let used_spaces: BTreeSet<String> =
        graph.spaces.values().map(|s| s.room_augment_id.clone()).filter(|id| !id.is_empty()).collect();
    let mut next_space = next_free("SP-", 3, &used_spaces);
    for space in graph.spaces.values().filter(|s| s.room_augment_id.is_empty()) {
        plan.spaces.push(SpaceRecord { room_augment_id: next_space(), ..space.clone() });
    }
    Ok(plan)
}

impl TwinStore {
    /// Commits [`plan_augment_ids`]. Returns the number of records updated;
    /// zero when everything already has ids.
    pub fn assign_augment_ids(&mut self, at: Timestamp) -> Result<usize, IngestError> {
        let plan = plan_augment_ids(self.graph())?;
        let n = plan.len();
        for space in plan.spaces {
            self.commit(at, EventBody::SpaceUpserted(space))?;
        }
        for item in plan.equipment {
            self.commit(at, EventBody::EquipmentUpserted(item))?;
        }
        Ok(n)
    }
}

use serde::Serialize;

use super::{Discipline, DocumentMeta, EquipmentItem, EventBody, GraphError, SpaceRecord, TwinStore};
use crate::omniclass::OmniclassTable;
use crate::time::Timestamp;

/// Warning raised when the declared discipline disagrees with the one implied
/// by the system code. The record is still stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DisciplineMismatch {
    pub declared: Discipline,
    pub implied: Discipline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquipmentUpsert {
    /// Empty while the item awaits AugmentID assignment.
    pub augment_id_instance: String,
    pub committed: bool,
    pub discipline_mismatch: Option<DisciplineMismatch>,
}

pub fn discipline_mismatch(item: &EquipmentItem) -> Option<DisciplineMismatch> {
    let implied = item.omniclass_system.system_discipline()?;
    (implied != item.discipline).then_some(DisciplineMismatch { declared: item.discipline, implied })
}

impl TwinStore {
    /// Stores a room. Re-sending an unchanged record is a no-op; changing the
    /// name or category of an existing tag needs `overwrite`.
    pub fn upsert_space(&mut self, at: Timestamp, mut record: SpaceRecord, overwrite: bool) -> Result<String, GraphError> {
        if record.room_category.table() != OmniclassTable::Spaces {
            return Err(GraphError::MalformedCategory(record.room_category.to_string()));
        }
        record.room_tag = record.room_tag.trim().to_string();
        if record.room_tag.is_empty() {
            return Err(GraphError::EmptyTag);
        }
        if let Some(existing) = self.graph().spaces.get(&record.room_tag) {
            if record.room_augment_id.is_empty() {
                record.room_augment_id = existing.room_augment_id.clone();
            }
            if *existing == record {
                return Ok(record.room_tag);
            }
            let identity_changed =
                existing.room_name != record.room_name || existing.room_category != record.room_category;
            if identity_changed && !overwrite {
                return Err(GraphError::DuplicateTagConflict { tag: record.room_tag });
            }
        }
        let tag = record.room_tag.clone();
        self.commit(at, EventBody::SpaceUpserted(record))?;
        Ok(tag)
    }

    pub fn upsert_equipment(&mut self, at: Timestamp, record: EquipmentItem) -> Result<EquipmentUpsert, GraphError> {
        for code in [&record.omniclass_system, &record.omniclass_type] {
            if code.table() != OmniclassTable::Products {
                return Err(GraphError::MalformedCode(code.to_string()));
            }
        }
        if !self.graph().spaces.contains_key(&record.space_instance) {
            return Err(GraphError::UnknownSpace(record.space_instance.clone()));
        }
        let mismatch = discipline_mismatch(&record);
        let id = record.augment_id_instance.clone();
        if !id.is_empty() {
            if let Some(existing) = self.graph().equipment.get(&id) {
                if super::TwinGraph::same_equipment(existing, &record) {
                    return Ok(EquipmentUpsert { augment_id_instance: id, committed: false, discipline_mismatch: mismatch });
                }
            }
        }
        self.commit(at, EventBody::EquipmentUpserted(record))?;
        Ok(EquipmentUpsert { augment_id_instance: id, committed: true, discipline_mismatch: mismatch })
    }

    /// Links a document to an equipment item. An empty `doc_id` gets the next
    /// free `DOC-nnnnn`.
    pub fn attach_document(&mut self, at: Timestamp, equipment_id: &str, mut meta: DocumentMeta) -> Result<String, GraphError> {
        if !self.graph().equipment.contains_key(equipment_id) {
            return Err(GraphError::UnknownEquipment(equipment_id.to_string()));
        }
        if meta.doc_id.trim().is_empty() {
            let docs = &self.graph().documents;
            meta.doc_id = (docs.len() + 1..)
                .map(|n| format!("DOC-{n:05}"))
                .find(|id| !docs.contains_key(id))
                .unwrap();
        }
        let id = meta.doc_id.clone();
        self.commit(at, EventBody::DocAttached { equipment_id: equipment_id.to_string(), document: meta })?;
        Ok(id)
    }
}

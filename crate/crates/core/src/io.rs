//! CSV formats for histories, offers, consumer requests and ground truth.
//!
//! All files are UTF-8, comma-separated, with a mandatory header row. Rows
//! are validated through the domain constructors on the way in, so a record
//! whose status contradicts its delivery is rejected rather than trusted.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::demand::RequestRecord;
use crate::error::{Error, Result};
use crate::model::{EnergyService, HistoryRecord, ProviderId, ProviderProfile, ServiceStatus, TimeInterval};
use crate::workload::{GroundTruthBehavior, Scenario};

#[derive(Debug, Serialize, Deserialize)]
struct HistoryRow {
    provider_id: String,
    service_id: String,
    microcell: String,
    #[serde(rename = "advertised_mAh")]
    advertised_mah: f64,
    #[serde(rename = "delivered_mAh")]
    delivered_mah: f64,
    adv_start_min: i64,
    adv_end_min: i64,
    act_start_min: i64,
    act_end_min: i64,
    status: ServiceStatus,
    affected_consumers: u32,
    consumers_present: u32,
}

impl From<&HistoryRecord> for HistoryRow {
    fn from(h: &HistoryRecord) -> Self {
        let s = h.service();
        Self {
            provider_id: s.provider_id().to_string(),
            service_id: s.service_id().to_string(),
            microcell: h.microcell().to_string(),
            advertised_mah: s.amount(),
            delivered_mah: h.delivered(),
            adv_start_min: s.interval().start(),
            adv_end_min: s.interval().end(),
            act_start_min: h.actual_interval().start(),
            act_end_min: h.actual_interval().end(),
            status: h.status(),
            affected_consumers: h.affected_consumers(),
            consumers_present: h.consumers_present(),
        }
    }
}

impl TryFrom<HistoryRow> for HistoryRecord {
    type Error = Error;

    fn try_from(row: HistoryRow) -> Result<Self> {
        let service = EnergyService::new(
            row.service_id,
            row.provider_id,
            row.advertised_mah,
            row.microcell.clone(),
            TimeInterval::new(row.adv_start_min, row.adv_end_min)?,
        )?;
        HistoryRecord::new(
            service,
            row.delivered_mah,
            row.microcell,
            TimeInterval::new(row.act_start_min, row.act_end_min)?,
            row.status,
            row.affected_consumers,
            row.consumers_present,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OfferRow {
    provider_id: String,
    service_id: String,
    microcell: String,
    #[serde(rename = "amount_mAh")]
    amount_mah: f64,
    start_min: i64,
    end_min: i64,
}

impl From<&EnergyService> for OfferRow {
    fn from(s: &EnergyService) -> Self {
        Self {
            provider_id: s.provider_id().to_string(),
            service_id: s.service_id().to_string(),
            microcell: s.location().to_string(),
            amount_mah: s.amount(),
            start_min: s.interval().start(),
            end_min: s.interval().end(),
        }
    }
}

impl TryFrom<OfferRow> for EnergyService {
    type Error = Error;

    fn try_from(row: OfferRow) -> Result<Self> {
        EnergyService::new(
            row.service_id,
            row.provider_id,
            row.amount_mah,
            row.microcell,
            TimeInterval::new(row.start_min, row.end_min)?,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRow {
    consumer_id: String,
    microcell: String,
    #[serde(rename = "amount_mAh")]
    amount_mah: f64,
    start_min: i64,
    end_min: i64,
}

impl From<&RequestRecord> for RequestRow {
    fn from(r: &RequestRecord) -> Self {
        Self {
            consumer_id: r.consumer_id().to_owned(),
            microcell: r.microcell().to_string(),
            amount_mah: r.amount(),
            start_min: r.slot().start(),
            end_min: r.slot().end(),
        }
    }
}

impl TryFrom<RequestRow> for RequestRecord {
    type Error = Error;

    fn try_from(row: RequestRow) -> Result<Self> {
        RequestRecord::new(
            row.consumer_id,
            row.amount_mah,
            TimeInterval::new(row.start_min, row.end_min)?,
            row.microcell,
        )
    }
}

const HISTORY_HEADER: [&str; 12] = [
    "provider_id",
    "service_id",
    "microcell",
    "advertised_mAh",
    "delivered_mAh",
    "adv_start_min",
    "adv_end_min",
    "act_start_min",
    "act_end_min",
    "status",
    "affected_consumers",
    "consumers_present",
];
const OFFER_HEADER: [&str; 6] = [
    "provider_id",
    "service_id",
    "microcell",
    "amount_mAh",
    "start_min",
    "end_min",
];
const REQUEST_HEADER: [&str; 5] = ["consumer_id", "microcell", "amount_mAh", "start_min", "end_min"];
const BEHAVIOR_HEADER: [&str; 5] = [
    "provider_id",
    "reliability",
    "delivery_fraction",
    "delay_minutes",
    "stay_minutes",
];

/// The header is written up front so that an empty table still has one.
fn write_rows<W: Write, R: Serialize>(writer: W, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_rows<R: Read, Row: DeserializeOwned, T: TryFrom<Row, Error = Error>>(reader: R) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize::<Row>()
        .map(|row| T::try_from(row?))
        .collect()
}

pub fn write_history<W: Write>(writer: W, records: &[HistoryRecord]) -> Result<()> {
    write_rows(writer, &HISTORY_HEADER, records.iter().map(HistoryRow::from))
}

pub fn read_history<R: Read>(reader: R) -> Result<Vec<HistoryRecord>> {
    read_rows::<_, HistoryRow, _>(reader)
}

pub fn write_offers<W: Write>(writer: W, offers: &[EnergyService]) -> Result<()> {
    write_rows(writer, &OFFER_HEADER, offers.iter().map(OfferRow::from))
}

pub fn read_offers<R: Read>(reader: R) -> Result<Vec<EnergyService>> {
    read_rows::<_, OfferRow, _>(reader)
}

pub fn write_requests<W: Write>(writer: W, requests: &[RequestRecord]) -> Result<()> {
    write_rows(writer, &REQUEST_HEADER, requests.iter().map(RequestRow::from))
}

pub fn read_requests<R: Read>(reader: R) -> Result<Vec<RequestRecord>> {
    read_rows::<_, RequestRow, _>(reader)
}

pub fn write_behaviors<W: Write>(writer: W, behaviors: &BTreeMap<ProviderId, GroundTruthBehavior>) -> Result<()> {
    write_rows(writer, &BEHAVIOR_HEADER, behaviors.values())
}

pub fn read_behaviors<R: Read>(reader: R) -> Result<BTreeMap<ProviderId, GroundTruthBehavior>> {
    csv::Reader::from_reader(reader)
        .deserialize::<GroundTruthBehavior>()
        .map(|row| {
            let b = row?;
            Ok((b.provider_id.clone(), b))
        })
        .collect()
}

/// Pairs every offer with its provider's history records, in file order.
pub fn assemble_profiles(history: Vec<HistoryRecord>, offers: Vec<EnergyService>) -> Vec<ProviderProfile> {
    let mut by_provider: BTreeMap<ProviderId, Vec<HistoryRecord>> = BTreeMap::new();
    for record in history {
        by_provider
            .entry(record.service().provider_id().clone())
            .or_default()
            .push(record);
    }
    offers
        .into_iter()
        .map(|offer| {
            let history = by_provider.remove(offer.provider_id()).unwrap_or_default();
            ProviderProfile::new(history, offer)
        })
        .collect()
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn at<T>(path: &Path, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::CsvData(source) => Error::Csv {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn read_history_file(path: &Path) -> Result<Vec<HistoryRecord>> {
    at(path, read_history(open(path)?))
}

pub fn read_offers_file(path: &Path) -> Result<Vec<EnergyService>> {
    at(path, read_offers(open(path)?))
}

pub fn read_requests_file(path: &Path) -> Result<Vec<RequestRecord>> {
    at(path, read_requests(open(path)?))
}

pub fn read_behaviors_file(path: &Path) -> Result<BTreeMap<ProviderId, GroundTruthBehavior>> {
    at(path, read_behaviors(open(path)?))
}

/// File names used by [`write_scenario`].
pub const HISTORY_FILE: &str = "history.csv";
pub const OFFERS_FILE: &str = "offers.csv";
pub const REQUESTS_FILE: &str = "requests.csv";
pub const BEHAVIORS_FILE: &str = "ground_truth.csv";

/// Writes a scenario as four CSV files into `dir`.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let history: Vec<HistoryRecord> = scenario
        .providers
        .iter()
        .flat_map(|p| p.history().iter().cloned())
        .collect();
    let offers: Vec<EnergyService> = scenario.providers.iter().map(|p| p.offered_service().clone()).collect();
    let path = dir.join(HISTORY_FILE);
    at(&path, write_history(create(&path)?, &history))?;
    let path = dir.join(OFFERS_FILE);
    at(&path, write_offers(create(&path)?, &offers))?;
    let path = dir.join(REQUESTS_FILE);
    at(&path, write_requests(create(&path)?, &scenario.requests))?;
    let path = dir.join(BEHAVIORS_FILE);
    at(&path, write_behaviors(create(&path)?, &scenario.behaviors))
}

/// Reads back a directory written by [`write_scenario`].
pub fn read_scenario(dir: &Path) -> Result<Scenario> {
    let history = read_history_file(&dir.join(HISTORY_FILE))?;
    let offers = read_offers_file(&dir.join(OFFERS_FILE))?;
    Ok(Scenario {
        providers: assemble_profiles(history, offers),
        requests: read_requests_file(&dir.join(REQUESTS_FILE))?,
        behaviors: read_behaviors_file(&dir.join(BEHAVIORS_FILE))?,
    })
}

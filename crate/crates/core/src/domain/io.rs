//! Catalog CSV and planogram/fixture JSON files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Catalog, DomainError, Fixture, Planogram, Product};

pub const CATALOG_HEADER: [&str; 10] = [
    "sku",
    "width_cm",
    "height_cm",
    "depth_cm",
    "weight_kg",
    "category",
    "brand",
    "price",
    "margin",
    "age_restricted",
];

fn open(path: &Path) -> Result<File, DomainError> {
    File::open(path).map_err(|e| DomainError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, DomainError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| DomainError::Io(format!("{}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DomainError::Io(format!("{}: {e}", path.display())))
}

fn csv_error(e: csv::Error) -> DomainError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let field = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.field().map(|f| {
            CATALOG_HEADER.get(f as usize).copied().unwrap_or("?").to_string()
        }),
        _ => None,
    };
    DomainError::Parse {
        line: line as usize,
        field,
        message: e.to_string(),
    }
}

/// Reads a catalog from CSV text with the canonical header.
pub fn read_catalog<R: Read>(reader: R) -> Result<Catalog, DomainError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CATALOG_HEADER.iter().copied()) {
        return Err(DomainError::Parse {
            line: 1,
            field: None,
            message: format!("expected header `{}`", CATALOG_HEADER.join(",")),
        });
    }
    let products = rdr
        .deserialize::<Product>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(csv_error)?;
    Catalog::new(products)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, DomainError> {
    read_catalog(open(path.as_ref())?)
}

pub fn write_catalog<W: Write>(catalog: &Catalog, writer: W) -> Result<(), DomainError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in catalog.products() {
        w.serialize(p).map_err(csv_error)?;
    }
    w.flush().map_err(|e| DomainError::Io(e.to_string()))
}

pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<(), DomainError> {
    write_catalog(catalog, create(path.as_ref())?)
}

fn json_error(e: serde_json::Error) -> DomainError {
    DomainError::Parse {
        line: e.line(),
        field: None,
        message: e.to_string(),
    }
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, DomainError> {
    serde_json::from_reader(BufReader::new(open(path.as_ref())?)).map_err(json_error)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), DomainError> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value).map_err(json_error)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| DomainError::Io(e.to_string()))
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture, DomainError> {
    let f: Fixture = load_json(path)?;
    f.validate()?;
    Ok(f)
}

pub fn load_planogram(path: impl AsRef<Path>) -> Result<Planogram, DomainError> {
    let p: Planogram = load_json(path)?;
    p.fixture.validate()?;
    Ok(p)
}

/// Reads one JSON document per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, DomainError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| DomainError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DomainError::Parse {
            line: i + 1,
            field: None,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DomainError> {
    read_jsonl(open(path.as_ref())?)
}

pub fn save_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<(), DomainError> {
    let mut w = create(path.as_ref())?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(json_error)?;
        writeln!(w).map_err(|e| DomainError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| DomainError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "sku,width_cm,height_cm,depth_cm,weight_kg,category,brand,price,margin,age_restricted\n\
        a1,10,20,5,1.5,snacks,acme,2.5,0.8,false\n\
        b2,8,25,6,0.5,spirits,vino,20,-1.5,true\n";

    #[test]
    fn csv_round_trip() {
        let cat = read_catalog(CSV.as_bytes()).unwrap();
        assert_eq!(cat.len(), 2);
        assert!(cat.get("b2").unwrap().age_restricted);
        let mut buf = Vec::new();
        write_catalog(&cat, &mut buf).unwrap();
        assert_eq!(read_catalog(buf.as_slice()).unwrap(), cat);
    }

    #[test]
    fn parse_error_reports_line_and_field() {
        let bad = CSV.replace("0.5,spirits", "heavy,spirits");
        let err = read_catalog(bad.as_bytes()).unwrap_err();
        match err {
            DomainError::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field.as_deref(), Some("weight_kg"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_weight_row_is_an_invariant_violation() {
        let bad = CSV.replace("0.5,spirits", "0,spirits");
        assert!(matches!(read_catalog(bad.as_bytes()), Err(DomainError::InvalidRecords(r)) if r[0].starts_with("b2")));
    }

    #[test]
    fn duplicate_sku_is_named() {
        let bad = CSV.replace("b2,", "a1,");
        assert!(matches!(read_catalog(bad.as_bytes()), Err(DomainError::DuplicateSku(s)) if s == "a1"));
    }

    #[test]
    fn unknown_planogram_fields_are_rejected() {
        let json = r#"{"fixture":{"width_cm":100,"height_cm":150,"shelf_count":1,
            "per_shelf":[{"clearance_height_cm":40,"weight_capacity_kg":50}],"slot_columns":4},
            "placements":[],"store_id":"s1","extra":1}"#;
        assert!(serde_json::from_str::<Planogram>(json).is_err());
        let ok = json.replace(r#","extra":1"#, "");
        assert!(serde_json::from_str::<Planogram>(&ok).is_ok());
    }
}

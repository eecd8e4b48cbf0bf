//! Parsers for the `::`-delimited MovieLens 1M file layout.
//!
//! Ratings and users are ASCII; movie titles are Latin-1 (the 1M dump is
//! not UTF-8 clean), so every file is decoded byte-for-byte as Latin-1.

use std::fs;
use std::path::Path;

use crate::data::{Gender, Interaction, ItemId, UserRecord};
use crate::error::{Error, Result};

/// One parsed `movies.dat` line before genre indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCatalogEntry {
    pub item_id: ItemId,
    pub title: String,
    pub genres: Vec<String>,
}

fn read_latin1(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

/// Parses `UserID::MovieID::Rating::Timestamp` lines.
pub fn parse_interactions(path: &Path) -> Result<Vec<Interaction>> {
    let text = read_latin1(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(Error::malformed(path, no, "expected 4 `::` fields"));
        }
        let user_id = fields[0]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad user id {:?}", fields[0])))?;
        let item_id = fields[1]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad item id {:?}", fields[1])))?;
        let rating: u8 = fields[2]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad rating {:?}", fields[2])))?;
        if !(1..=5).contains(&rating) {
            return Err(Error::malformed(
                path,
                no,
                format!("rating {rating} outside 1..=5"),
            ));
        }
        let timestamp = fields[3]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad timestamp {:?}", fields[3])))?;
        out.push(Interaction {
            user_id,
            item_id,
            rating,
            timestamp,
        });
    }
    Ok(out)
}

/// Parses `MovieID::Title::Genre1|Genre2|...` lines. Titles may contain
/// single colons, so the id is taken before the first `::` and the genre
/// list after the last one.
pub fn parse_catalog(path: &Path) -> Result<Vec<RawCatalogEntry>> {
    let text = read_latin1(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        if line.is_empty() {
            continue;
        }
        let first = line
            .find("::")
            .ok_or_else(|| Error::malformed(path, no, "missing `::` separators"))?;
        let last = line.rfind("::").expect("found above");
        if first == last {
            return Err(Error::malformed(path, no, "expected 3 `::` fields"));
        }
        let item_id = line[..first]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad item id {:?}", &line[..first])))?;
        let title = line[first + 2..last].to_string();
        let genres: Vec<String> = line[last + 2..]
            .split('|')
            .filter(|g| !g.is_empty())
            .map(str::to_string)
            .collect();
        if genres.is_empty() {
            return Err(Error::malformed(path, no, "empty genre list"));
        }
        out.push(RawCatalogEntry {
            item_id,
            title,
            genres,
        });
    }
    Ok(out)
}

/// Parses `UserID::Gender::Age::Occupation::Zip` lines. Occupation and zip
/// are carried by the format but unused here.
pub fn parse_users(path: &Path) -> Result<Vec<UserRecord>> {
    let text = read_latin1(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 5 {
            return Err(Error::malformed(path, no, "expected 5 `::` fields"));
        }
        let user_id = fields[0]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad user id {:?}", fields[0])))?;
        let gender = match fields[1] {
            "M" => Gender::M,
            "F" => Gender::F,
            other => {
                return Err(Error::malformed(path, no, format!("bad gender {other:?}")));
            }
        };
        let age_code = fields[2]
            .parse()
            .map_err(|_| Error::malformed(path, no, format!("bad age {:?}", fields[2])))?;
        out.push(UserRecord {
            user_id,
            gender,
            age_code,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f
    }

    #[test]
    fn parses_movielens_rating_line() {
        let f = write_temp(b"1::1193::5::978300760\n");
        let rows = parse_interactions(f.path()).unwrap();
        assert_eq!(
            rows,
            vec![Interaction {
                user_id: 1,
                item_id: 1193,
                rating: 5,
                timestamp: 978300760
            }]
        );
    }

    #[test]
    fn empty_ratings_file_is_empty_sequence() {
        let f = write_temp(b"");
        assert!(parse_interactions(f.path()).unwrap().is_empty());
    }

    #[test]
    fn malformed_rating_line_reports_line_number() {
        let f = write_temp(b"1::x::5::0\n");
        match parse_interactions(f.path()) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }

    #[test]
    fn rating_out_of_range_is_malformed() {
        let f = write_temp(b"1::2::6::0\n");
        assert!(matches!(
            parse_interactions(f.path()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn parses_multi_genre_movie() {
        let f = write_temp(b"1::Toy Story (1995)::Animation|Children's|Comedy\n");
        let rows = parse_catalog(f.path()).unwrap();
        assert_eq!(rows[0].item_id, 1);
        assert_eq!(rows[0].title, "Toy Story (1995)");
        assert_eq!(rows[0].genres, vec!["Animation", "Children's", "Comedy"]);
    }

    #[test]
    fn latin1_title_survives() {
        // "Lé" in Latin-1: 0x4c 0xe9
        let f = write_temp(b"9::L\xe9on (1994)::Action\n");
        let rows = parse_catalog(f.path()).unwrap();
        assert_eq!(rows[0].title, "L\u{e9}on (1994)");
    }

    #[test]
    fn title_with_inner_colons() {
        let f = write_temp(b"2::Movie: The Sequel::Comedy|Drama\n");
        let rows = parse_catalog(f.path()).unwrap();
        assert_eq!(rows[0].title, "Movie: The Sequel");
        assert_eq!(rows[0].genres.len(), 2);
    }

    #[test]
    fn parses_user_line() {
        let f = write_temp(b"1::F::1::10::48067\n");
        let rows = parse_users(f.path()).unwrap();
        assert_eq!(
            rows,
            vec![UserRecord {
                user_id: 1,
                gender: Gender::F,
                age_code: 1
            }]
        );
    }

    #[test]
    fn bad_gender_is_malformed() {
        let f = write_temp(b"1::X::1::10::48067\n");
        assert!(matches!(
            parse_users(f.path()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_interactions(Path::new("/nonexistent/ratings.dat")),
            Err(Error::Io { .. })
        ));
    }
}

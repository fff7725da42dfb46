//! Bundled sample tables used by tests, the corpus generator and demos.

use crate::table::{load_table, DataTable, LoadOptions};

pub const CARS_CSV: &str = include_str!("../fixtures/cars.csv");
pub const BOOKS_CSV: &str = include_str!("../fixtures/books.csv");
pub const RETAIL_CSV: &str = include_str!("../fixtures/retail.csv");
pub const TOY_BRANDS_CSV: &str = include_str!("../fixtures/toy_brands.csv");

/// Ten small mixed-type tables (at most 6 columns, at most 50 rows).
pub const SMALL_CSVS: [(&str, &str); 10] = [
    ("t01", include_str!("../fixtures/small/t01.csv")),
    ("t02", include_str!("../fixtures/small/t02.csv")),
    ("t03", include_str!("../fixtures/small/t03.csv")),
    ("t04", include_str!("../fixtures/small/t04.csv")),
    ("t05", include_str!("../fixtures/small/t05.csv")),
    ("t06", include_str!("../fixtures/small/t06.csv")),
    ("t07", include_str!("../fixtures/small/t07.csv")),
    ("t08", include_str!("../fixtures/small/t08.csv")),
    ("t09", include_str!("../fixtures/small/t09.csv")),
    ("t10", include_str!("../fixtures/small/t10.csv")),
];

fn load(name: &str, csv: &str) -> DataTable {
    load_table(csv.as_bytes(), &LoadOptions::named(name)).expect("bundled fixture parses")
}

/// 275 car sales records: year, sales, model, brand.
pub fn cars() -> DataTable {
    load("cars", CARS_CSV)
}

/// Book ratings: book, user rating, reviews, price, year, genre.
pub fn books() -> DataTable {
    load("books", BOOKS_CSV)
}

/// Monthly retail revenue by region and product.
pub fn retail() -> DataTable {
    load("retail", RETAIL_CSV)
}

/// Three brands whose total sales are A 10, B 30, C 20.
pub fn toy_brands() -> DataTable {
    load("toy_brands", TOY_BRANDS_CSV)
}

pub fn small_tables() -> Vec<DataTable> {
    SMALL_CSVS.iter().map(|(name, csv)| load(name, csv)).collect()
}

/// The tables the corpus generator draws on by default.
pub fn corpus_tables() -> Vec<DataTable> {
    vec![books(), cars(), retail()]
}

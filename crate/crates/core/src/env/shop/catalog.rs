use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptionGroup {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopItem {
    pub item_id: String,
    pub template: String,
    pub title: String,
    pub price: f64,
    pub options: Vec<OptionGroup>,
    pub attributes: Vec<String>,
}

impl ShopItem {
    pub fn has_attributes(&self, required: &[String]) -> bool {
        required.iter().all(|a| self.attributes.contains(a))
    }

    pub fn offers(&self, value: &str) -> bool {
        self.options.iter().any(|g| g.values.iter().any(|v| v == value))
    }

    pub fn group_of(&self, value: &str) -> Option<&str> {
        self.options
            .iter()
            .find(|g| g.values.iter().any(|v| v == value))
            .map(|g| g.name.as_str())
    }
}

pub struct Product {
    pub noun: &'static str,
    pub attributes: &'static [&'static str],
    pub groups: &'static [(&'static str, &'static [&'static str])],
    pub brands: &'static [&'static str],
    pub price: (u32, u32),
}

pub const PRODUCTS: [Product; 8] = [
    Product {
        noun: "deodorant",
        attributes: &["sensitive skin", "aluminum free", "travel size"],
        groups: &[
            ("scent", &["bright citrus", "calming lavender", "ginger fresh", "simply non-scents"]),
            ("size", &["3 ounce (pack of 1)", "3-ounce (2-pack)", "travel set (4-pack)"]),
        ],
        brands: &["Earth Mama", "Barrel and Oak", "Native Grove"],
        price: (5, 30),
    },
    Product {
        noun: "shower brush",
        attributes: &["long handle", "soft bristle", "exfoliating"],
        groups: &[
            ("color", &["light pink", "beige", "green", "gray"]),
            ("pack", &["1 pack", "2 pack"]),
        ],
        brands: &["Prozklves", "JulaJuyo", "Bathwise"],
        price: (5, 25),
    },
    Product {
        noun: "ottoman bench",
        attributes: &["storage space", "faux leather", "living room"],
        groups: &[("color", &["black", "brown", "gray", "white"]), ("size", &["small", "large"])],
        brands: &["Sorbus", "HomePop", "Seville"],
        price: (40, 200),
    },
    Product {
        noun: "headphones",
        attributes: &["noise cancelling", "wireless", "over ear"],
        groups: &[("color", &["black", "silver", "blue"])],
        brands: &["Sonora", "Audiora", "Kestrel"],
        price: (20, 150),
    },
    Product {
        noun: "coffee",
        attributes: &["dark roast", "organic", "whole bean"],
        groups: &[
            ("size", &["12 ounce (pack of 1)", "2 pound (pack of 1)", "24 count"]),
            ("flavor", &["french vanilla", "hazelnut", "original"]),
        ],
        brands: &["Peakbrew", "Morning Ridge", "Bellhaven"],
        price: (8, 40),
    },
    Product {
        noun: "shampoo",
        attributes: &["sulfate free", "dry scalp", "natural ingredients"],
        groups: &[("scent", &["tea tree", "coconut", "unscented"]), ("size", &["8 fl oz", "16 fl oz"])],
        brands: &["Puretide", "Herbvale", "Glossa"],
        price: (6, 30),
    },
    Product {
        noun: "phone case",
        attributes: &["shockproof", "slim fit", "wireless charging"],
        groups: &[
            ("color", &["clear", "black", "rose gold", "navy"]),
            ("model", &["iphone 13", "iphone 14", "galaxy s22"]),
        ],
        brands: &["Armorix", "Casely", "Tuffcase"],
        price: (8, 35),
    },
    Product {
        noun: "yoga mat",
        attributes: &["non slip", "extra thick", "eco friendly"],
        groups: &[("color", &["purple", "teal", "black"]), ("size", &["6mm", "10mm"])],
        brands: &["Zenflex", "Stretchwell", "Lotusline"],
        price: (15, 60),
    },
];

pub fn product(template: &str) -> Option<&'static Product> {
    PRODUCTS.iter().find(|p| p.noun == template)
}

pub fn template_names() -> Vec<&'static str> {
    PRODUCTS.iter().map(|p| p.noun).collect()
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercase alphanumeric tokens used for search matching.
pub fn tokens(s: &str) -> BTreeSet<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub seed: u64,
    pub items: Vec<ShopItem>,
}

pub const ITEMS_PER_PRODUCT: usize = 12;

impl Catalog {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_4F50);
        let mut items = Vec::new();
        let mut ids = BTreeSet::new();
        for p in &PRODUCTS {
            for _ in 0..ITEMS_PER_PRODUCT {
                let brand = *p.brands.choose(&mut rng).expect("brands");
                let n_attr = rng.gen_range(1..=2usize);
                let mut attrs: Vec<&str> = p.attributes.choose_multiple(&mut rng, n_attr).copied().collect();
                attrs.sort_by_key(|a| p.attributes.iter().position(|x| x == a));
                let mut options = Vec::new();
                if rng.gen_bool(0.8) {
                    for (g, vals) in p.groups {
                        if !rng.gen_bool(0.85) {
                            continue;
                        }
                        let k = rng.gen_range(2..=vals.len());
                        let mut chosen: Vec<&str> = vals.choose_multiple(&mut rng, k).copied().collect();
                        chosen.sort_by_key(|v| vals.iter().position(|x| x == v));
                        options.push(OptionGroup {
                            name: g.to_string(),
                            values: chosen.into_iter().map(str::to_string).collect(),
                        });
                    }
                }
                let dollars = rng.gen_range(p.price.0..p.price.1);
                let price = dollars as f64 + 0.99;
                let mut title = format!("{brand} {} {}", title_case(attrs[0]), title_case(p.noun));
                for a in &attrs[1..] {
                    title.push_str(", ");
                    title.push_str(&title_case(a));
                }
                let item_id = loop {
                    let id: String = (0..8)
                        .map(|_| {
                            let c = rng.gen_range(0..36u8);
                            if c < 10 {
                                (b'0' + c) as char
                            } else {
                                (b'A' + c - 10) as char
                            }
                        })
                        .collect();
                    let id = format!("B0{id}");
                    if ids.insert(id.clone()) {
                        break id;
                    }
                };
                items.push(ShopItem {
                    item_id,
                    template: p.noun.to_string(),
                    title,
                    price,
                    options,
                    attributes: attrs.into_iter().map(str::to_string).collect(),
                });
            }
        }
        Catalog { seed, items }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn item(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.item_id == id)
    }

    /// Items sharing at least one token with the query, most overlapping first, ties by id.
    pub fn search(&self, query: &str) -> Vec<usize> {
        let q = tokens(query);
        let mut hits: Vec<(usize, usize)> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (i, tokens(&it.title).intersection(&q).count()))
            .filter(|&(_, n)| n > 0)
            .collect();
        hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| self.items[a.0].item_id.cmp(&self.items[b.0].item_id)));
        hits.into_iter().map(|(i, _)| i).collect()
    }
}

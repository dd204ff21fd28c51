//! The 19 published measurement rows shipped as a fixture.
//!
//! Kept as text so the printed precision of every value is preserved.

use serde::{Deserialize, Serialize};

use crate::regressors::{Dataset, Row};

/// index, irradiance W/m², temperature °C, measured Pmpp, before model,
/// before abs error, after model, after abs error.
pub const TABLE4: [&str; 19] = [
    "1\t758.20481\t25\t170.1704039\t130.1439\t40.02648\t170.823415\t0.6530116",
    "2\t1052.9782\t25\t226.5815128\t173.1067\t53.47478\t225.512129\t1.069383",
    "3\t690.8158\t25\t135.3307771\t104.3459\t30.98481\t136.376119\t1.0453419",
    "4\t354.3819\t32.7525\t79.01153151\t60.16712\t18.84440\t78.6257803\t0.3857511",
    "5\t5.8948\t24.7592\t1.12620655\t0.8648653\t0.261341\t1.13762379\t0.0114172",
    "6\t337.1830\t32.2157\t67.92064731\t53.64569\t14.27495\t70.0431348\t2.122487",
    "7\t312.8262\t31.3557\t68.09774599\t51.83700\t16.26073\t67.7019406\t0.3958053",
    "8\t337.8380\t39.8892\t93.5353097\t74.41641\t19.11889\t97.1195477\t3.584238",
    "9\t748.6899\t25\t140.9083832\t108.8447\t32.06360\t142.312376\t1.403993",
    "10\t270.4983\t34.6003\t53.8320397\t33.73084\t20.10119\t44.0441940\t9.78784",
    "11\t26.7269\t24.3589\t5.599556093\t4.315890\t1.283665\t5.67068945\t0.0711333",
    "12\t25.0901\t18.0228\t5.427678173\t4.126344\t1.301333\t5.4214532\t0.006224",
    "13\t28.5818\t22.6388\t6.065162425\t4.61099\t1.45417\t6.05839301\t0.0067694",
    "14\t509.8802\t34.189\t136.9420536\t105.8897\t31.0522\t138.811745\t1.86969",
    "15\t866.5382\t25\t209.5477248\t159.9034\t49.6442\t208.8015\t10.746213",
    "16\t167.7977\t27.443\t36.18891578\t27.80469\t8.38421\t36.3949765\t0.20606",
    "17\t688.2516\t38.7823\t158.0277967\t120.9957\t37.0320\t158.713578\t0.685782",
    "18\t336.2404\t38.6242\t68.70395999\t52.65637\t16.0475\t68.7156330\t0.0116730",
    "19\t40.3040\t25\t8.637984468\t6.701487\t1.93649\t8.80011887\t0.162134",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table4Row {
    pub index: usize,
    pub irradiance: f64,
    pub temperature: f64,
    pub measured: f64,
    pub before_model: f64,
    pub before_abs_error: f64,
    pub after_model: f64,
    pub after_abs_error: f64,
}

impl Table4Row {
    fn parse(line: &str) -> Self {
        let f: Vec<&str> = line.split('\t').collect();
        let num = |i: usize| f[i].parse::<f64>().expect("fixture value");
        Self {
            index: f[0].parse().expect("fixture index"),
            irradiance: num(1),
            temperature: num(2),
            measured: num(3),
            before_model: num(4),
            before_abs_error: num(5),
            after_model: num(6),
            after_abs_error: num(7),
        }
    }
}

pub fn table4_rows() -> Vec<Table4Row> {
    TABLE4.iter().map(|l| Table4Row::parse(l)).collect()
}

/// The fixture as a regression dataset: (irradiance, temperature) → measured Pmpp.
pub fn load_table4_fixture() -> Dataset {
    let rows = table4_rows()
        .into_iter()
        .map(|r| Row { g: r.irradiance, t: r.temperature, p: r.measured })
        .collect();
    Dataset::new(rows).expect("fixture is a valid dataset")
}

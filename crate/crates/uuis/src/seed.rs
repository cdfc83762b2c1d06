//! Organisation and account seed applied by `init`. Persons name their
//! faculty, department and roles; the seed resolves those to ids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuis_core::{EntityId, Role};

use crate::error::{Error, Result};
use crate::inventory::{NewDepartment, NewFaculty, NewPerson};
use crate::service::Service;

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seed {
    pub faculties: Vec<SeedFaculty>,
    pub persons: Vec<SeedPerson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedFaculty {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub building: String,
    pub departments: Vec<SeedDepartment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedDepartment {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub building: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedPerson {
    pub username: String,
    pub password: String,
    pub name: String,
    pub level: u8,
    pub faculty: Option<String>,
    pub department: Option<String>,
    pub roles: Vec<String>,
    pub high_privileged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SeedReport {
    pub faculties: usize,
    pub departments: usize,
    pub persons: usize,
}

impl Seed {
    pub fn parse(text: &str) -> Result<Seed> {
        toml::from_str(text).map_err(|e| Error::Config(format!("seed: {e}")))
    }
}

impl Service {
    pub fn apply_seed(&self, seed: &Seed) -> Result<SeedReport> {
        let system = self.system_actor()?;
        let mut report = SeedReport::default();
        let mut faculties: BTreeMap<String, EntityId> = BTreeMap::new();
        let mut departments: BTreeMap<(String, String), EntityId> = BTreeMap::new();
        for f in &seed.faculties {
            let faculty = self.add_faculty(
                &system,
                NewFaculty { name: f.name.clone(), kind: f.kind.clone(), building: f.building.clone() },
            )?;
            report.faculties += 1;
            faculties.insert(f.name.clone(), faculty.id);
            for d in &f.departments {
                let dep = self.add_department(
                    &system,
                    NewDepartment {
                        faculty_id: Some(faculty.id),
                        name: d.name.clone(),
                        kind: d.kind.clone(),
                        building: d.building.clone(),
                    },
                )?;
                report.departments += 1;
                departments.insert((f.name.clone(), d.name.clone()), dep.id);
            }
        }
        let roles: BTreeMap<String, EntityId> = self.list_roles()?.into_iter().map(|r: Role| (r.name, r.id)).collect();
        for p in &seed.persons {
            let faculty_id = p
                .faculty
                .as_ref()
                .map(|f| faculties.get(f).copied().ok_or_else(|| Error::UnknownName("faculty", f.clone())))
                .transpose()?;
            let department_id = match (&p.faculty, &p.department) {
                (Some(f), Some(d)) => Some(
                    departments
                        .get(&(f.clone(), d.clone()))
                        .copied()
                        .ok_or_else(|| Error::UnknownName("department", d.clone()))?,
                ),
                (None, Some(d)) => return Err(Error::Config(format!("seed: department {d} needs a faculty"))),
                _ => None,
            };
            let role_ids = p
                .roles
                .iter()
                .map(|r| roles.get(r).copied().ok_or_else(|| Error::UnknownName("role", r.clone())))
                .collect::<Result<_>>()?;
            self.add_person(
                &system,
                NewPerson {
                    username: p.username.clone(),
                    password: p.password.clone(),
                    name: p.name.clone(),
                    level: p.level,
                    faculty_id,
                    department_id,
                    role_ids,
                    high_privileged: p.high_privileged,
                    ..NewPerson::default()
                },
            )?;
            report.persons += 1;
        }
        Ok(report)
    }

    /// Creates the first university-level administrator.
    pub fn bootstrap_admin(&self, username: &str, password: &str) -> Result<EntityId> {
        let seed = Seed {
            faculties: Vec::new(),
            persons: vec![SeedPerson {
                username: username.into(),
                password: password.into(),
                name: "Administrator".into(),
                level: 3,
                roles: vec!["administrator".into()],
                ..SeedPerson::default()
            }],
        };
        self.apply_seed(&seed)?;
        let id = self
            .read(|r| r.find_by::<uuis_core::Person>("username", &username))?
            .map(|p| p.id)
            .ok_or_else(|| Error::UnknownName("person", username.into()))?;
        Ok(id)
    }
}

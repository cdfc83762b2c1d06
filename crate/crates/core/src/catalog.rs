//! Permission catalog and default role packages.
//!
//! Both come from one data file, `data/roles.txt`, so the catalog, the seeded
//! roles and any documentation generated from them cannot drift apart.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// The bundled catalog file.
pub const DEFAULT_CATALOG: &str = include_str!("../data/roles.txt");

/// Well-known permission names used by the service itself.
pub mod perm {
    pub const INSERT_ASSET: &str = "insertAsset";
    pub const SEE_ASSETS: &str = "seeAssets";
    pub const EDIT_ASSET: &str = "editAsset";
    pub const DELETE_ASSETS: &str = "deleteAssets";
    pub const BORROW_ASSETS: &str = "borrowAssets";
    pub const ADD_GROUP_ASSET: &str = "addGroupAsset";
    pub const ADD_TYPE_ASSET: &str = "addTypeAsset";
    pub const ADD_SUBGROUP_ASSET: &str = "addSubgroupAsset";
    pub const IMPORT_ASSET: &str = "importAsset";
    pub const ASSIGN_ASSETS_TO_PERSON: &str = "assignAssetsToPerson";
    pub const ASSIGN_ASSETS_TO_LOCATION: &str = "assignAssetsToLocation";
    pub const SEE_MY_ASSETS: &str = "seeMyAssets";
    pub const INSERT_LOCATION: &str = "insertLocation";
    pub const SEE_LOCATIONS: &str = "seeLocations";
    pub const EDIT_LOCATION: &str = "editLocation";
    pub const DELETE_LOCATIONS: &str = "deleteLocations";
    pub const ADD_GROUP_LOCATION: &str = "addGroupLocation";
    pub const ADD_TYPE_LOCATION: &str = "addTypeLocation";
    pub const SEE_PRINT_FLOOR_PLAN: &str = "see_printFloorPlan";
    pub const IMPORT_LOCATION: &str = "importLocation";
    pub const ASSIGN_LOCATION_TO_PERSON: &str = "assignLocationToPerson";
    pub const ASSIGN_LOCATION_TO_LOCATION: &str = "assignLocationToLocation";
    pub const ASSIGN_LOCATION_TO_DEPARTMENT: &str = "assignLocationToDepartment";
    pub const SEE_MY_LOCATIONS: &str = "seeMyLocations";
    pub const INSERT_LICENSE: &str = "insertLicense";
    pub const SEE_LICENSES: &str = "seeLicenses";
    pub const EDIT_LICENSE: &str = "editLisense";
    pub const DELETE_LICENSES: &str = "deleteLicenses";
    pub const BORROW_LICENSES: &str = "borrowLicenses";
    pub const ADD_TYPE_LICENSE: &str = "addTypeLicence";
    pub const IMPORT_LICENSE: &str = "importLicense";
    pub const ASSIGN_LICENSE_TO_ASSET: &str = "assignLicenceToAsset";
    pub const SEE_MY_LICENSES: &str = "seeMyLicenses";
    pub const SEE_PERSONS: &str = "seePersons";
    pub const EDIT_PERSON: &str = "editPerson";
    pub const DELETE_PERSONS: &str = "deletePersons";
    pub const ADD_BIOMETRIC: &str = "addBiometric";
    pub const IMPORT_PERSON: &str = "importPerson";
    pub const ADD_ROLE: &str = "addRole";
    pub const EDIT_ROLE: &str = "editRole";
    pub const ADD_PERMISSION: &str = "addPermission";
    pub const EDIT_PERMISSION: &str = "editPermission";
    pub const ASSIGN_PERMISSION_TO_PERSONS: &str = "assignPermissionToPersons";
    pub const ASSIGN_ROLE_TO_PERSONS: &str = "assignRoleToPersons";
    pub const SEE_MY_ROLE: &str = "seeMyRole";
    pub const SEE_MY_PERMISSIONS: &str = "seeMyPermissions";
    pub const INSERT_FAC_DEP: &str = "insertFacDep";
    pub const SEE_FAC_DEP: &str = "seeFacDep";
    pub const EDIT_FAC_DEP: &str = "editFacDep";
    pub const CREATE_ACQUISITION_REQUEST: &str = "createAcquisitionRequest";
    pub const CREATE_REPARATION_REQUEST: &str = "createReparationRequest";
    pub const CREATE_ELIMINATION_REQUEST: &str = "createEliminationRequest";
    pub const CREATE_MOVE_REQUEST: &str = "createMoveRequest";
    pub const APPROVE_REJECT_REQUEST: &str = "aprove_rejectRequest";
    pub const SEE_REQUESTS_ALL: &str = "seeRequestsAll";
    pub const BASIC_SEARCH: &str = "basicSearch";
    pub const ADVANCED_SEARCH: &str = "advancedSearch";
    pub const CREATE_PRINT_REPORT: &str = "create_printReport";
    pub const SEE_AUDIT: &str = "seeAudit";
    pub const SEE_MY_PROFILE: &str = "seeMyProfile";
    pub const SELECT_LANGUAGE: &str = "selectLanguage";
    pub const LOGIN_LOGOUT: &str = "login_logout";
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("role `{role}` references unknown permission `{permission}`")]
    UnknownPermission { role: String, permission: String },
    #[error("permission `{0}` listed twice in the catalog")]
    DuplicatePermission(String),
}

/// Parsed catalog file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub version: u32,
    /// Catalog names in file order.
    pub permissions: Vec<String>,
    /// Permissions merged into every default role.
    pub base: BTreeSet<String>,
    /// Role name to its listed permissions, before the base set is merged.
    /// Kept in file order.
    pub roles: Vec<(String, BTreeSet<String>)>,
}

enum Section {
    None,
    Catalog,
    Base,
    Role(usize),
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let mut version = 0;
        let mut permissions: Vec<String> = Vec::new();
        let mut base = BTreeSet::new();
        let mut roles: Vec<(String, BTreeSet<String>)> = Vec::new();
        let mut section = Section::None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("version ") {
                version = rest.trim().parse().map_err(|_| CatalogError::Syntax {
                    line: line_no,
                    message: "bad version".to_string(),
                })?;
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match header.trim() {
                    "catalog" => Section::Catalog,
                    "base" => Section::Base,
                    other => match other.strip_prefix("role ") {
                        Some(name) if !name.trim().is_empty() => {
                            roles.push((name.trim().to_string(), BTreeSet::new()));
                            Section::Role(roles.len() - 1)
                        }
                        _ => {
                            return Err(CatalogError::Syntax {
                                line: line_no,
                                message: alloc::format!("unknown section `{other}`"),
                            })
                        }
                    },
                };
                continue;
            }
            match section {
                Section::None => {
                    return Err(CatalogError::Syntax {
                        line: line_no,
                        message: "entry outside of a section".to_string(),
                    })
                }
                Section::Catalog => {
                    if permissions.iter().any(|p| p == line) {
                        return Err(CatalogError::DuplicatePermission(line.to_string()));
                    }
                    permissions.push(line.to_string());
                }
                Section::Base => {
                    base.insert(line.to_string());
                }
                Section::Role(i) => {
                    if line == "@catalog" {
                        roles[i].1.extend(permissions.iter().cloned());
                    } else {
                        // grants are a set, repeated rows collapse
                        roles[i].1.insert(line.to_string());
                    }
                }
            }
        }

        let catalog = Catalog { version, permissions, base, roles };
        catalog.check()?;
        Ok(catalog)
    }

    pub fn bundled() -> Catalog {
        Catalog::parse(DEFAULT_CATALOG).expect("bundled catalog is well-formed")
    }

    fn check(&self) -> Result<(), CatalogError> {
        let known: BTreeSet<&str> = self.permissions.iter().map(String::as_str).collect();
        for p in &self.base {
            if !known.contains(p.as_str()) {
                return Err(CatalogError::UnknownPermission {
                    role: "base".to_string(),
                    permission: p.clone(),
                });
            }
        }
        for (role, perms) in &self.roles {
            if let Some(p) = perms.iter().find(|p| !known.contains(p.as_str())) {
                return Err(CatalogError::UnknownPermission { role: role.clone(), permission: p.clone() });
            }
        }
        Ok(())
    }

    pub fn contains(&self, permission: &str) -> bool {
        self.permissions.iter().any(|p| p == permission)
    }

    /// Default roles with the base set merged in.
    pub fn default_roles(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.roles
            .iter()
            .map(|(name, perms)| {
                let mut all = perms.clone();
                all.extend(self.base.iter().cloned());
                (name.clone(), all)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog_shape() {
        let c = Catalog::bundled();
        assert_eq!(c.version, 1);
        assert_eq!(c.permissions.len(), 62);
        assert_eq!(c.base.len(), 12);
        assert_eq!(c.roles.len(), 8);
        assert_eq!(c.permissions.first().map(String::as_str), Some("insertAsset"));
        assert_eq!(c.permissions.last().map(String::as_str), Some("login_logout"));
    }

    #[test]
    fn duplicate_rows_collapse() {
        let c = Catalog::bundled();
        let ptf = &c.roles.iter().find(|(n, _)| n == "part_time_faculty").unwrap().1;
        // create_printReport appears twice in the source table
        assert_eq!(ptf.len(), 11);
    }

    #[test]
    fn rejects_unknown_permission() {
        let text = "[catalog]\na\n[role r]\nb\n";
        assert_eq!(
            Catalog::parse(text),
            Err(CatalogError::UnknownPermission { role: "r".into(), permission: "b".into() })
        );
    }

    #[test]
    fn rejects_entries_outside_sections() {
        assert!(matches!(Catalog::parse("a\n"), Err(CatalogError::Syntax { line: 1, .. })));
    }
}

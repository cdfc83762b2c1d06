//! Seeded roles resolve exactly their listed permissions plus the base set.

use std::collections::BTreeSet;

use crate::common::world;
use crate::{ensure, Outcome};

const ADMINISTRATOR: [&str; 62] = [
    "insertAsset",
    "seeAssets",
    "editAsset",
    "deleteAssets",
    "borrowAssets",
    "addGroupAsset",
    "addTypeAsset",
    "addSubgroupAsset",
    "importAsset",
    "assignAssetsToPerson",
    "assignAssetsToLocation",
    "seeMyAssets",
    "insertLocation",
    "seeLocations",
    "editLocation",
    "deleteLocations",
    "addGroupLocation",
    "addTypeLocation",
    "see_printFloorPlan",
    "importLocation",
    "assignLocationToPerson",
    "assignLocationToLocation",
    "assignLocationToDepartment",
    "seeMyLocations",
    "insertLicense",
    "seeLicenses",
    "editLisense",
    "deleteLicenses",
    "borrowLicenses",
    "addTypeLicence",
    "importLicense",
    "assignLicenceToAsset",
    "seeMyLicenses",
    "seePersons",
    "editPerson",
    "deletePersons",
    "addBiometric",
    "importPerson",
    "addRole",
    "editRole",
    "addPermission",
    "editPermission",
    "assignPermissionToPersons",
    "assignRoleToPersons",
    "seeMyRole",
    "seeMyPermissions",
    "insertFacDep",
    "seeFacDep",
    "editFacDep",
    "createAcquisitionRequest",
    "createReparationRequest",
    "createEliminationRequest",
    "createMoveRequest",
    "aprove_rejectRequest",
    "seeRequestsAll",
    "basicSearch",
    "advancedSearch",
    "create_printReport",
    "seeAudit",
    "seeMyProfile",
    "selectLanguage",
    "login_logout",
];

const BASE: [&str; 12] = [
    "basicSearch",
    "createAcquisitionRequest",
    "createEliminationRequest",
    "createReparationRequest",
    "login_logout",
    "seeMyAssets",
    "seeMyLicenses",
    "seeMyLocations",
    "seeMyProfile",
    "seeMyPermissions",
    "seeMyRole",
    "selectLanguage",
];

const PART_TIME_WORKER: [&str; 4] = ["see_printFloorPlan", "seeAssets", "seeLicenses", "seeLocations"];
const UNDERGRAD_STUDENT: [&str; 1] = ["see_printFloorPlan"];

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn criterion() -> Outcome {
    let w = world();
    let resolved = |role: &str| {
        let (_, username) = w.person(3, None, None, &[role]);
        w.login(&username).1.principal.permissions
    };

    let admin = resolved("administrator");
    let want = set(&ADMINISTRATOR);
    ensure!(want.len() == 62, "administrator oracle lists {} distinct names", want.len());
    ensure!(admin == want, "administrator differs: missing {:?}, extra {:?}", want.difference(&admin), admin.difference(&want));

    let base = set(&BASE);
    for (role, own) in [("part_time_worker", &PART_TIME_WORKER[..]), ("undergrad_student", &UNDERGRAD_STUDENT[..])] {
        let want: BTreeSet<String> = base.union(&set(own)).cloned().collect();
        ensure!(want.len() == own.len() + 12, "{role} oracle overlaps the base set");
        let got = resolved(role);
        ensure!(got == want, "{role} differs: missing {:?}, extra {:?}", want.difference(&got), got.difference(&want));
    }
    Ok("administrator 62, part_time_worker 4+12, undergrad_student 1+12".into())
}

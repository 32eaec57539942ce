#include "sucm/common.hpp"

namespace sucm {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::MultipleRoots: return "MultipleRoots";
    case Errc::MixedChildKinds: return "MixedChildKinds";
    case Errc::OrphanNode: return "OrphanNode";
    case Errc::DuplicateApp: return "DuplicateApp";
    case Errc::UnknownApp: return "UnknownApp";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::UnknownUser: return "UnknownUser";
    case Errc::RootHasNoChoice: return "RootHasNoChoice";
    case Errc::EmptyAppList: return "EmptyAppList";
    case Errc::EmptySubcategory: return "EmptySubcategory";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::NodeNotInCompetingSet: return "NodeNotInCompetingSet";
    case Errc::IndexOutOfPath: return "IndexOutOfPath";
    case Errc::UserHasAdoptedEverything: return "UserHasAdoptedEverything";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::NoEvaluableUsers: return "NoEvaluableUsers";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownAppInRecord: return "UnknownAppInRecord";
    case Errc::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case Errc::SpecInfeasible: return "SpecInfeasible";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sucm

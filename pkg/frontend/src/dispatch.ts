/** Turn a simulation recommendation into a linked StructureSimulation run. */

import { ApiClient } from "./api.js";
import type { RecommendationItem } from "./model.js";

export async function dispatchRecommendation(
  client: ApiClient,
  parentRunId: string,
  rec: RecommendationItem,
  objective = "DefectRelaxation",
): Promise<string> {
  if (!rec.canDispatch) {
    throw new Error(`recommendation "${rec.title}" is not a simulation`);
  }
  if (rec.structureRequest === "") {
    throw new Error(`recommendation "${rec.title}" carries no structure request`);
  }
  const { run_id } = await client.createRun({
    kind: "StructureSimulation",
    request: rec.structureRequest,
    config: { objective },
    parent: parentRunId,
  });
  return run_id;
}

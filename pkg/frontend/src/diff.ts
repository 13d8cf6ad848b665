/**
 * Candidate differencing, computed from the per-entity mapping explanations
 * the service returns — never by re-parsing SQL on the client.
 *
 * A mapping chip is "distinguishing" when at least one other candidate maps
 * the same entity to a different column; those chips are what the user
 * should look at to tell the candidates apart.
 */

import { Candidate, EntityMapping } from "./types.js";

export interface MappingChip extends EntityMapping {
  distinguishing: boolean;
}

export function mappingChips(
  candidate: Candidate,
  all: Candidate[],
): MappingChip[] {
  return candidate.explanation.map((mapping) => {
    const others = all.filter((c) => c.id !== candidate.id);
    const distinguishing = others.some((other) =>
      other.explanation.some(
        (m) => m.entity === mapping.entity && m.column !== mapping.column,
      ),
    );
    return { ...mapping, distinguishing };
  });
}

/** Entities whose mapping differs somewhere across the candidate set. */
export function contestedEntities(candidates: Candidate[]): string[] {
  const byEntity = new Map<string, Set<string>>();
  for (const cand of candidates) {
    for (const m of cand.explanation) {
      if (!byEntity.has(m.entity)) byEntity.set(m.entity, new Set());
      byEntity.get(m.entity)!.add(m.column);
    }
  }
  return [...byEntity.entries()]
    .filter(([, columns]) => columns.size > 1)
    .map(([entity]) => entity);
}

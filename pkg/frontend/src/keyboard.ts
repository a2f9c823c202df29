export type LabelAction = "yes" | "no" | "skip";

const KEY_ACTIONS: Record<string, LabelAction> = {
  y: "yes",
  Y: "yes",
  n: "no",
  N: "no",
  s: "skip",
  S: "skip",
};

/** Map a keyboard key to a labelling action, or null when unbound. */
export function actionForKey(key: string): LabelAction | null {
  return KEY_ACTIONS[key] ?? null;
}

/** True when the event targets a form control and shortcuts must not fire. */
export function isTypingTarget(target: EventTarget | null): boolean {
  if (typeof HTMLElement === "undefined" || !(target instanceof HTMLElement)) {
    return false;
  }
  return (
    target.tagName === "INPUT" ||
    target.tagName === "TEXTAREA" ||
    target.tagName === "SELECT" ||
    target.isContentEditable
  );
}

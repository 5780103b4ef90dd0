// Wire-protocol message shapes (etfrp/1) as seen by the trainer.

export interface StatePayload {
  truck_feats: number[][];
  truck_status_onehot: number[][];
  delivery_feats: number[][];
  charger_feats: number[][];
  /** [src_type, src_idx, dst_type, dst_idx, tau_norm, e_norm] */
  edges: [string, number, string, number, number, number][];
}

export interface ActionsPayload {
  feats: number[][];
  mask: number[];
}

export interface ObsMessage {
  type: 'obs';
  episode_step: number;
  active_truck: number;
  state: StatePayload;
  actions: ActionsPayload;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
  id?: number;
}

export interface EpisodeEndMessage {
  type: 'episode_end';
  reward: number;
  metrics: {
    reward_total: number;
    success: boolean;
    deliveries_completed: number;
    charging_sessions: number;
    charging_time_h: number;
    waiting_time_h: number;
    routing_time_h: number;
    unloading_time_h: number;
    total_time_h: number;
    avg_finish_soc: number;
  };
  id?: number;
}

export interface HelloMessage {
  type: 'hello';
  protocol: string;
  fixed_size: number | null;
  id?: number;
}

export interface ErrorMessage {
  type: 'error';
  message: string;
  id?: number;
}

export type ServerMessage = ObsMessage | EpisodeEndMessage | HelloMessage | ErrorMessage;

export const NODE_TYPES = ['truck', 'delivery', 'charger'] as const;
export type NodeType = (typeof NODE_TYPES)[number];

export const TRUCK_FEATS = 5 + 6; // scalar features plus the status one-hot
export const DELIVERY_FEATS = 2;
export const CHARGER_FEATS = 6;
export const EDGE_FEATS = 2;
export const ACTION_FEATS = 3;

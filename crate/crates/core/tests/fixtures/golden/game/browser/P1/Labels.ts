export enum Labels {
  Draw = "Draw",
  Lose = "Lose",
  Pos = "Pos",
  Update = "Update",
  Win = "Win",
}

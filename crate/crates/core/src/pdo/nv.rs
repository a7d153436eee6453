// nv module placeholder

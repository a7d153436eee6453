// wave module placeholder
